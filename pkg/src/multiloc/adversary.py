"""Symbolic network adversaries: eavesdrop, replay, man-in-the-middle, DoS.

The adversary only ever acts on insecure links.  It can record, drop, delay,
re-send and rebuild terms from parts it holds, but it cannot open a
ciphertext without the key.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field, replace

from .commuting import SymbolStream
from .envelope import Atom, Enc, Term, Tup
from .errors import ConfigError
from .messages import MsgType, ProtocolMessage
from .network import Link, Network
from .shares import Share

ADVERSARY_KEY = "K_E"


class Mode(enum.Enum):
    NONE = "none"
    EAVESDROP = "eavesdrop"
    REPLAY = "replay"
    MITM = "mitm"
    DOS = "dos"


class Strategy(enum.Enum):
    RELAY = "relay"
    SUBSTITUTE = "substitute"
    SUPPRESS = "suppress"


@dataclass(frozen=True)
class AdversaryConfig:
    mode: Mode = Mode.NONE
    # EAVESDROP: the tap set; MITM: exactly one link; DOS: target links
    links: tuple[tuple[str, str], ...] = ()
    msg_type: MsgType | None = None
    delay: int = 1
    strategy: Strategy = Strategy.RELAY
    # DOS on a party hits every insecure link into it
    target: str | None = None
    drop_rate: float = 0.0
    flood_rate: int = 0
    service_rate: int = 1
    seed: int = 0
    knows_grammar: bool = False
    keys: tuple[str, ...] = ()

    def describe(self) -> str:
        links = ",".join(f"{a}->{b}" for a, b in self.links)
        if self.mode is Mode.EAVESDROP:
            return f"eavesdrop {links or 'all'}"
        if self.mode is Mode.REPLAY:
            return f"replay {self.msg_type.value if self.msg_type else '?'} delay={self.delay}"
        if self.mode is Mode.MITM:
            return f"mitm {links} {self.strategy.value}"
        if self.mode is Mode.DOS:
            what = self.target or links
            rate = f"drop={self.drop_rate}" if self.flood_rate == 0 else f"flood={self.flood_rate}"
            return f"dos {what} {rate}"
        return "none"


@dataclass
class Adversary:
    config: AdversaryConfig
    # (transcript seq, payload) of everything seen on touched links
    observed: list[tuple[int, Term]] = field(default_factory=list)
    _targets: set[tuple[str, str]] = field(default_factory=set)
    _rng: random.Random = field(init=False)

    def __post_init__(self) -> None:
        self._rng = random.Random(self.config.seed)

    def validate(self, net: Network) -> None:
        cfg = self.config
        for src, dst in cfg.links:
            if net.link(src, dst).secure:
                raise ConfigError(f"adversary cannot act on secure link {src}->{dst}")
        if cfg.mode is Mode.EAVESDROP:
            self._targets = set(cfg.links) or {k for k, l in net.links.items() if not l.secure}
        elif cfg.mode is Mode.MITM:
            if len(cfg.links) != 1:
                raise ConfigError("MITM acts on exactly one link")
            self._targets = set(cfg.links)
        elif cfg.mode is Mode.DOS:
            if cfg.target is not None:
                if cfg.target not in net.parties:
                    raise ConfigError(f"DoS target {cfg.target} is not a party")
                self._targets = {k for k, l in net.links.items() if k[1] == cfg.target and not l.secure}
            else:
                self._targets = set(cfg.links)
            if not self._targets:
                raise ConfigError("DoS has no insecure link to act on")
            if not 0.0 <= cfg.drop_rate <= 1.0 or cfg.flood_rate < 0:
                raise ConfigError("DoS rates out of range")
        elif cfg.mode is Mode.REPLAY:
            if cfg.msg_type is None:
                raise ConfigError("REPLAY needs a message type")
            if cfg.delay < 0:
                raise ConfigError("REPLAY delay must be >= 0")
            self._targets = set(cfg.links) or {k for k, l in net.links.items() if not l.secure}

    def touches(self, link: Link) -> bool:
        return (link.src, link.dst) in self._targets

    def intercept(
        self, msg: ProtocolMessage, link: Link, net: Network
    ) -> tuple[ProtocolMessage | None, str, int]:
        if not self.touches(link):
            return msg, "none", 0
        mode = self.config.mode
        seq = len(net.transcript) + 1
        if mode is Mode.EAVESDROP:
            self.observed.append((seq, msg.payload))
            return msg, "tap", 0
        if mode is Mode.REPLAY:
            if msg.msg_type is not self.config.msg_type:
                return msg, "none", 0
            self.observed.append((seq, msg.payload))
            net.call_at(net.now + self.config.delay, lambda: net.inject(msg, "replay"))
            return msg, "record", 0
        if mode is Mode.MITM:
            self.observed.append((seq, msg.payload))
            strategy = self.config.strategy
            if strategy is Strategy.SUPPRESS:
                return None, "suppress", 0
            if strategy is Strategy.SUBSTITUTE:
                return replace(msg, payload=tamper(msg.payload)), "substitute", 0
            return msg, "relay", 0
        if mode is Mode.DOS:
            self.observed.append((seq, msg.payload))
            if self.config.flood_rate:
                return msg, "flood", self._flood_delay(net.now)
            if self._rng.random() < self.config.drop_rate:
                return None, "drop", 0
            return msg, "none", 0
        return msg, "none", 0

    def _flood_delay(self, now: int) -> int:
        # Junk arrives from tick 0 at flood_rate per tick and is served at
        # service_rate per tick; a real message queues behind the backlog.
        rate, service = self.config.flood_rate, max(1, self.config.service_rate)
        backlog = max(0, (rate - service) * (now + 1)) + rate
        return math.ceil(backlog / service)

    def observed_terms(self) -> list[Term]:
        return [t for _, t in self.observed]


def tamper(term: Term) -> Term:
    """Alter one part of ``term`` the way a wire-level attacker could.

    The first clear atom found (depth first) is changed; a share gets one
    chunk rule swapped for its neighbour, which still derives legally.  If
    everything is encrypted, the first ciphertext is re-wrapped under the
    adversary's own key.
    """
    done = False

    def walk(t: Term) -> Term:
        nonlocal done
        if done:
            return t
        if isinstance(t, Atom):
            done = True
            return _flip_atom(t)
        if isinstance(t, Tup):
            return Tup(*(walk(item) for item in t.items))
        return t

    out = walk(term)
    if done:
        return out

    def wrap(t: Term) -> Term:
        nonlocal done
        if done:
            return t
        if isinstance(t, Enc):
            done = True
            return Enc(ADVERSARY_KEY, t)
        if isinstance(t, Tup):
            return Tup(*(wrap(item) for item in t.items))
        return t

    return wrap(term)


def _flip_atom(atom: Atom) -> Atom:
    v = atom.value
    if isinstance(v, Share):
        tokens = list(v.tokens)
        chunk = next((i for i, t in enumerate(tokens) if t >= 4), None)
        if chunk is not None:
            tokens[chunk] ^= 1
        elif tokens:
            tokens[0] = 2 if tokens[0] == 3 else 3
        return Atom(atom.kind, replace(v, tokens=tuple(tokens)))
    if isinstance(v, SymbolStream):
        p = v.domain.p
        els = list(v.elements)
        if els:
            els[0] = els[0] + 1 if els[0] < p - 1 else 1
        return Atom(atom.kind, SymbolStream(tuple(els), v.domain))
    if isinstance(v, int):
        return Atom(atom.kind, v + 1)
    return Atom(atom.kind, f"E:{v}")
