"""Scenario files and the top-level simulation runner.

A scenario is a line-oriented ``key = value`` file; ``#`` starts a comment and
keys marked (repeatable) may appear more than once::

    protocol   = modified              # or three_stage
    seed       = 1                     # required here, via --seed, or MULTILOC_SEED
    message    = hello
    chunk_width = 3
    char_width = 7
    delta      = 10                    # freshness window, ticks
    timeout    = 50                    # default 5 * delta
    latency    = 1                     # default per-link latency
    seal       = yes                   # bind the two shares with a commitment
    split      = interleave            # or halves
    principal  = A2 AA2                # (repeatable) extra principal and its agent
    session    = A B hello @0          # (repeatable) initiator responder message @start
    link       = A->KDC 5              # (repeatable) latency override
    skew       = BB -11                # (repeatable) party clock offset
    provision  = BB K_B grammar k      # (repeatable) replace a party's provisioning row
    adversary  = replay AA_TO_B 2      # none | eavesdrop [links] | replay TYPE [delay]
                                       # | mitm SRC->DST relay|substitute|suppress
                                       # | dos PARTY|SRC->DST drop=R|flood=N
    adversary_knows = grammar K_B      # what the adversary holds besides traffic
    expect     = ACCEPTED              # final status every session must reach
    verdicts   = REPLAY_RESIST         # claims that must pass
    # three_stage only
    modulus    = 65537
    key_a      = 3                     # exponents; drawn from the seed if absent
    key_b      = 5
    knowledge  = basic                 # or multilocated
"""

from __future__ import annotations

import os
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .adversary import Adversary, AdversaryConfig, Mode, Strategy
from .commuting import DEFAULT_MODULUS, TransformDomain, TransformKey, keygen
from .errors import ConfigError, MultilocError, TransformError
from .grammar import DEFAULT_CHAR_WIDTH, MAX_CHUNK_WIDTH
from .messages import MsgType
from .network import Network, Transcript
from .protocol import (
    KDC,
    ModifiedDeployment,
    ProtocolParams,
    Provision,
    SessionResult,
    Status,
    ThreeStageDeployment,
    default_provisioning,
    deploy_modified,
    deploy_three_stage,
    final_status,
    long_term_key_id,
    standard_links,
)
from .shares import SplitPolicy
from .verdict import Claim, VerdictReport, attack_verdict

SEED_ENV = "MULTILOC_SEED"
PROTOCOLS = ("modified", "three_stage")


@dataclass(frozen=True)
class SessionSpec:
    initiator: str
    responder: str
    message: str
    start: int = 0


@dataclass
class ScenarioConfig:
    protocol: str = "modified"
    seed: int | None = None
    message: str = "hello"
    chunk_width: int = 3
    char_width: int = DEFAULT_CHAR_WIDTH
    modulus: int = DEFAULT_MODULUS
    delta: int = 10
    timeout: int | None = None
    latency: int = 1
    seal: bool = True
    split: SplitPolicy = SplitPolicy.INTERLEAVE
    principals: dict[str, str] = field(default_factory=lambda: {"A": "AA", "B": "BB"})
    sessions: list[SessionSpec] = field(default_factory=list)
    links: dict[tuple[str, str], int] = field(default_factory=dict)
    skew: dict[str, int] = field(default_factory=dict)
    provisioning: dict[str, Provision] = field(default_factory=dict)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    expect: Status = Status.ACCEPTED
    verdicts: tuple[Claim, ...] = ()
    key_a: int | None = None
    key_b: int | None = None
    knowledge: str = "basic"
    name: str = "scenario"

    @property
    def wait_limit(self) -> int:
        return self.timeout if self.timeout is not None else 5 * self.delta

    def params(self) -> ProtocolParams:
        return ProtocolParams(
            chunk_width=self.chunk_width,
            char_width=self.char_width,
            delta=self.delta,
            timeout=self.timeout,
            policy=self.split,
            seal_shares=self.seal,
            seed=self.seed or 0,
            clock_skew=tuple(sorted(self.skew.items())),
        )

    def session_list(self) -> list[SessionSpec]:
        return self.sessions or [SessionSpec("A", "B", self.message, 0)]

    def party_names(self) -> set[str]:
        names = set(self.principals) | set(self.principals.values())
        if self.protocol == "modified":
            names.add(KDC)
        return names

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.seed is None:
            raise ConfigError(f"no seed: set 'seed', pass --seed, or export {SEED_ENV}")
        if not 1 <= self.chunk_width <= MAX_CHUNK_WIDTH:
            raise ConfigError(f"chunk_width must be in [1, {MAX_CHUNK_WIDTH}]")
        if not self.chunk_width <= self.char_width <= 8:
            raise ConfigError("char_width must be in [chunk_width, 8]")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.wait_limit <= 0 or self.latency < 0:
            raise ConfigError("timeout must be positive and latency non-negative")
        names = self.party_names()
        if len(names) != len(self.principals) * 2 + (self.protocol == "modified"):
            raise ConfigError("party names must be unique")
        for s in self.session_list():
            for who in (s.initiator, s.responder):
                if who not in self.principals:
                    raise ConfigError(f"session references unknown principal {who}")
            if s.initiator == s.responder:
                raise ConfigError("a session needs two distinct principals")
            if s.start < 0:
                raise ConfigError("session start must be >= 0")
        initiators = {s.initiator for s in self.session_list()}
        responders = {s.responder for s in self.session_list()}
        if initiators & responders:
            raise ConfigError(f"principals cannot both initiate and respond: {sorted(initiators & responders)}")
        for src, dst in self.links:
            for who in (src, dst):
                if who not in names:
                    raise ConfigError(f"link references unknown party {who}")
        for who in list(self.skew) + list(self.provisioning):
            if who not in names:
                raise ConfigError(f"unknown party {who}")
        adv = self.adversary
        for src, dst in adv.links:
            for who in (src, dst):
                if who not in names:
                    raise ConfigError(f"adversary references unknown party {who}")
        if adv.target is not None and adv.target not in names:
            raise ConfigError(f"adversary references unknown party {adv.target}")
        if self.protocol == "three_stage":
            if set(self.principals.items()) != {("A", "AA"), ("B", "BB")}:
                raise ConfigError("three_stage runs with exactly A/AA and B/BB")
            if len(self.session_list()) != 1 or (self.session_list()[0].initiator, self.session_list()[0].responder) != ("A", "B"):
                raise ConfigError("three_stage runs exactly one A -> B session")
            if self.knowledge not in ("basic", "multilocated"):
                raise ConfigError("knowledge must be basic or multilocated")
            try:
                domain = TransformDomain(self.modulus)
                for exponent in (self.key_a, self.key_b):
                    if exponent is not None:
                        TransformKey.from_exponent(exponent, domain)
            except TransformError as exc:
                raise ConfigError(f"bad transform parameters: {exc}") from None
            if self.modulus <= 256:
                raise ConfigError("three_stage text messages need a modulus above 256")
        else:
            self._check_provisioning()

    def _check_provisioning(self) -> None:
        table = self.provision_table()
        for principal, agent in self.principals.items():
            kid = long_term_key_id(principal)
            row = table[principal]
            if kid not in row.keys or not (row.grammar and row.chunk_width):
                raise ConfigError(f"{principal} must hold {kid}, the grammar and k")
            if kid not in table[agent].keys:
                raise ConfigError(f"{agent} must hold {kid}")
            if kid not in table[KDC].keys:
                raise ConfigError(f"{KDC} must hold {kid}")
        known = {long_term_key_id(p) for p in self.principals}
        for who, row in table.items():
            extra = row.keys - known
            if extra:
                raise ConfigError(f"{who} is provisioned with unknown keys {sorted(extra)}")

    def provision_table(self) -> dict[str, Provision]:
        table = default_provisioning(self.principals)
        table.update(self.provisioning)
        return table


# --- parsing ---------------------------------------------------------------

_BOOL = {"yes": True, "true": True, "1": True, "no": False, "false": False, "0": False}


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _link(text: str) -> tuple[str, str]:
    m = re.fullmatch(r"(\S+?)->(\S+)", text)
    if not m:
        raise ConfigError(f"expected SRC->DST, got {text!r}")
    return m.group(1), m.group(2)


def _parse_adversary(value: str, seed: int) -> AdversaryConfig:
    parts = value.split()
    if not parts:
        raise ConfigError("empty adversary")
    mode = parts[0].lower()
    args = parts[1:]
    try:
        if mode == "none":
            return AdversaryConfig(seed=seed)
        if mode == "eavesdrop":
            return AdversaryConfig(Mode.EAVESDROP, links=tuple(_link(a) for a in args), seed=seed)
        if mode == "replay":
            msg_type = MsgType(args[0])
            delay = _int("replay delay", args[1]) if len(args) > 1 else 1
            return AdversaryConfig(Mode.REPLAY, msg_type=msg_type, delay=delay, seed=seed)
        if mode == "mitm":
            return AdversaryConfig(Mode.MITM, links=(_link(args[0]),), strategy=Strategy(args[1]), seed=seed)
        if mode == "dos":
            target, rest = args[0], dict(a.split("=", 1) for a in args[1:])
            unknown = set(rest) - {"drop", "flood", "service"}
            if unknown or not rest:
                raise ConfigError(f"dos takes drop=R or flood=N, got {args[1:]}")
            cfg = dict(
                drop_rate=float(rest.get("drop", 0.0)),
                flood_rate=_int("flood", rest.get("flood", "0")),
                service_rate=_int("service", rest.get("service", "1")),
                seed=seed,
            )
            if "->" in target:
                return AdversaryConfig(Mode.DOS, links=(_link(target),), **cfg)
            return AdversaryConfig(Mode.DOS, target=target, **cfg)
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad adversary {value!r}: {exc}") from None
    raise ConfigError(f"unknown adversary mode {mode!r}")


def parse_scenario(text: str, name: str = "scenario", seed: int | None = None) -> ScenarioConfig:
    """Parse scenario text.  ``seed`` overrides the file; MULTILOC_SEED is the fallback."""
    cfg = ScenarioConfig(name=name)
    raw_adversary: str | None = None
    knows: list[str] = []
    extra_principals: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        where = f"line {lineno}"
        if key == "protocol":
            cfg.protocol = value.lower()
        elif key == "seed":
            cfg.seed = _int(where, value)
        elif key == "message":
            cfg.message = value
        elif key in ("chunk_width", "char_width", "modulus", "delta", "timeout", "latency", "key_a", "key_b"):
            setattr(cfg, key, _int(where, value))
        elif key == "seal":
            if value.lower() not in _BOOL:
                raise ConfigError(f"{where}: seal is yes or no")
            cfg.seal = _BOOL[value.lower()]
        elif key == "split":
            try:
                cfg.split = SplitPolicy(value.upper())
            except ValueError:
                raise ConfigError(f"{where}: split is interleave or halves") from None
        elif key == "knowledge":
            cfg.knowledge = value.lower()
        elif key == "principal":
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(f"{where}: principal = NAME AGENT")
            extra_principals[parts[0]] = parts[1]
        elif key == "session":
            m = re.fullmatch(r"(\S+)\s+(\S+)\s*(.*?)\s*(?:@(\d+))?", value)
            if not m:
                raise ConfigError(f"{where}: session = INITIATOR RESPONDER MESSAGE [@TICK]")
            cfg.sessions.append(SessionSpec(m.group(1), m.group(2), m.group(3), int(m.group(4) or 0)))
        elif key == "link":
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(f"{where}: link = SRC->DST LATENCY")
            cfg.links[_link(parts[0])] = _int(where, parts[1])
        elif key == "skew":
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(f"{where}: skew = PARTY OFFSET")
            cfg.skew[parts[0]] = _int(where, parts[1])
        elif key == "provision":
            parts = value.split()
            if not parts:
                raise ConfigError(f"{where}: provision = PARTY ITEM...")
            items = set(parts[1:])
            cfg.provisioning[parts[0]] = Provision(
                frozenset(i for i in items if i not in ("grammar", "k")), "grammar" in items, "k" in items
            )
        elif key == "adversary":
            raw_adversary = value
        elif key == "adversary_knows":
            knows = value.replace(",", " ").split()
        elif key == "expect":
            try:
                cfg.expect = Status(value.upper())
            except ValueError:
                raise ConfigError(f"{where}: unknown status {value!r}") from None
        elif key == "verdicts":
            try:
                cfg.verdicts = tuple(Claim(v.strip().upper()) for v in value.split(",") if v.strip())
            except ValueError:
                raise ConfigError(f"{where}: unknown claim in {value!r}") from None
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    cfg.principals.update(extra_principals)
    if seed is not None:
        cfg.seed = seed
    elif cfg.seed is None and os.environ.get(SEED_ENV):
        cfg.seed = _int(SEED_ENV, os.environ[SEED_ENV])
    adv_seed = cfg.seed or 0
    adversary = _parse_adversary(raw_adversary, adv_seed) if raw_adversary else AdversaryConfig(seed=adv_seed)
    cfg.adversary = AdversaryConfig(
        **{
            **adversary.__dict__,
            "knows_grammar": "grammar" in knows,
            "keys": tuple(k for k in knows if k != "grammar"),
        }
    )
    cfg.validate()
    return cfg


def load_scenario(path: str | Path, seed: int | None = None) -> ScenarioConfig:
    """Load a scenario file, falling back to the bundled scenario of that name."""
    p = Path(path)
    if p.is_file():
        return parse_scenario(p.read_text(encoding="utf-8"), name=p.name, seed=seed)
    bundled = resources.files("multiloc") / "scenarios" / p.name
    if bundled.is_file():
        return parse_scenario(bundled.read_text(encoding="utf-8"), name=p.name, seed=seed)
    raise ConfigError(f"no scenario file {path}")


def bundled_scenarios() -> list[str]:
    root = resources.files("multiloc") / "scenarios"
    return sorted(f.name for f in root.iterdir() if f.name.endswith(".scn"))


# --- running ---------------------------------------------------------------


@dataclass
class RunOutcome:
    scenario: ScenarioConfig
    transcript: Transcript
    results: list[SessionResult]
    adversary: Adversary | None
    deployment: ModifiedDeployment | ThreeStageDeployment

    def final(self) -> dict[str, SessionResult]:
        return {s: final_status(self.results, s) for s in self.transcript.sessions}

    def verdicts(self, claims=None) -> list[VerdictReport]:
        cfg = self.scenario
        return [
            attack_verdict(
                self.transcript,
                self.results,
                claim,
                adversary=self.adversary,
                chunk_width=cfg.chunk_width,
                char_width=cfg.char_width,
                policy=cfg.split,
            )
            for claim in (cfg.verdicts if claims is None else claims)
        ]

    def expectation_met(self) -> bool:
        return all(r.status is self.scenario.expect for r in self.final().values())


def run_scenario(cfg: ScenarioConfig) -> RunOutcome:
    cfg.validate()
    sessions = cfg.session_list()
    horizon = max(s.start for s in sessions) + cfg.wait_limit
    adversary = Adversary(cfg.adversary) if cfg.adversary.mode is not Mode.NONE else None
    links = standard_links(cfg.principals, cfg.latency, cfg.links, with_kdc=cfg.protocol == "modified")
    net = Network(links, adversary=adversary, horizon=horizon)
    dep: ModifiedDeployment | ThreeStageDeployment
    if cfg.protocol == "modified":
        initiators = {s.initiator for s in sessions}
        dep = deploy_modified(net, cfg.params(), cfg.principals, initiators, cfg.provision_table())
        for i, s in enumerate(sessions, start=1):
            dep.start(f"s{i}", s.initiator, s.responder, s.message, s.start)
    else:
        domain = TransformDomain(cfg.modulus)
        rng = random.Random(cfg.seed)
        key_a = TransformKey.from_exponent(cfg.key_a, domain) if cfg.key_a else keygen(domain, rng)
        key_b = TransformKey.from_exponent(cfg.key_b, domain) if cfg.key_b else keygen(domain, rng)
        dep = deploy_three_stage(net, key_a, key_b, cfg.knowledge)
        dep.start("s1", sessions[0].message, domain, sessions[0].start)
    net.run()
    dep.log.close(list(net.transcript.sessions), horizon)
    return RunOutcome(cfg, net.transcript, list(dep.log.results), adversary, dep)


def schedule_and_run(cfg: ScenarioConfig) -> tuple[Transcript, list[SessionResult]]:
    outcome = run_scenario(cfg)
    return outcome.transcript, outcome.results


def report(outcome: RunOutcome) -> str:
    """Transcript, session outcomes and verdicts as stable text."""
    cfg = outcome.scenario
    out = [f"# scenario {cfg.name} protocol={cfg.protocol} seed={cfg.seed} adversary={cfg.adversary.describe()}"]
    out += outcome.transcript.lines()
    out.append("# results")
    out += [r.line() for r in outcome.results]
    out.append("# final")
    out += [r.line() for r in outcome.final().values()]
    verdicts = outcome.verdicts()
    if verdicts:
        out.append("# verdicts")
        out += [v.line() for v in verdicts]
    ok = outcome.expectation_met() and all(v.passed for v in verdicts)
    out.append(f"# expect {cfg.expect.value}: {'met' if outcome.expectation_met() else 'NOT met'}")
    out.append(f"# overall {'PASS' if ok else 'FAIL'}")
    return "\n".join(out) + "\n"


def passed(outcome: RunOutcome) -> bool:
    return outcome.expectation_met() and all(v.passed for v in outcome.verdicts())


__all__ = [
    "MultilocError",
    "RunOutcome",
    "ScenarioConfig",
    "SessionSpec",
    "bundled_scenarios",
    "load_scenario",
    "parse_scenario",
    "passed",
    "report",
    "run_scenario",
    "schedule_and_run",
]
