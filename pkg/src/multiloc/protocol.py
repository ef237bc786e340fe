"""Party state machines for the three-stage and the modified KDC protocol.

Modified protocol, happy path (``||`` is a two-element tuple)::

    1a  A   -> BB   V_AB                                     (insecure, clear)
    1b  A   -> AA   [V_AA, ID_B, N_a]                        (secure brief)
    1c  A   -> KDC  E(K_A, [ID_A, ID_B, N_a])
    2a  BB  -> KDC  E(K_B, [ID_B, N_b, T_b, V_AB])
    2b  BB  -> B    [N_b, T_b]                               (secure brief)
    3   KDC -> AA   E(K_A, [ID_B, N_a, T_b, K_s, N_b]) || E(K_B, [ID_A, K_s, V_AB])
    4   AA  -> B    E(K_B, [ID_A, K_s, V_AB]) || E(K_s, [N_b, V_AA])
    5   B merges V_AA and V_AB and decodes them with the grammar

Three message fields are additions needed to make the exchange checkable:
N_b in the K_A part of message 3 (AA must echo it in message 4), the brief
1b (AA must know N_a and ID_B to validate message 3) and the brief 2b (B
must know which N_b its own agent issued).
"""

from __future__ import annotations

import enum
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .commuting import SymbolStream, TransformKey, apply, invert, lift, unlift
from .envelope import Atom, CryptoContext, Enc, SymKey, Term, Tup, decrypt, ident, key_ref
from .errors import CodecError, ConfigError, EnvelopeError, ShareMismatch, TransformError
from .grammar import DEFAULT_CHAR_WIDTH, chunk_grammar, decode, encode_text
from .messages import MsgType, ProtocolMessage
from .network import Link, Network
from .shares import SALT_BYTES, Role, Share, SplitPolicy, merge, split

KDC = "KDC"


class Status(enum.Enum):
    ACCEPTED = "ACCEPTED"
    REJECTED_REPLAY = "REJECTED_REPLAY"
    REJECTED_STALE = "REJECTED_STALE"
    REJECTED_INTEGRITY = "REJECTED_INTEGRITY"
    TIMEOUT = "TIMEOUT"


@dataclass(frozen=True)
class SessionResult:
    session: str
    status: Status
    delivered_message: str | None = None
    transcript_ref: int = 0
    party: str = ""
    reason: str = ""
    tick: int = 0
    delivered_stream: SymbolStream | None = None

    @property
    def delivered(self) -> str | SymbolStream | None:
        return self.delivered_message if self.delivered_message is not None else self.delivered_stream

    def line(self) -> str:
        where = f" at {self.party}" if self.party else ""
        why = f" ({self.reason})" if self.reason else ""
        return f"session {self.session} {self.status.value}{where} tick={self.tick} ref={self.transcript_ref}{why}"


class OutcomeLog:
    """Every acceptance and rejection, in the order they happened."""

    def __init__(self) -> None:
        self.results: list[SessionResult] = []

    def record(
        self,
        net: Network,
        session: str,
        status: Status,
        party: str,
        reason: str = "",
        message: str | None = None,
        stream: SymbolStream | None = None,
    ) -> SessionResult:
        result = SessionResult(
            session=session,
            status=status,
            delivered_message=message,
            transcript_ref=net.delivering,
            party=party,
            reason=reason,
            tick=net.now,
            delivered_stream=stream,
        )
        self.results.append(result)
        return result

    def for_session(self, session: str) -> list[SessionResult]:
        return [r for r in self.results if r.session == session]

    def close(self, sessions: Iterable[str], tick: int) -> None:
        """Mark every session without any outcome as timed out."""
        seen = {r.session for r in self.results}
        for s in sessions:
            if s not in seen:
                self.results.append(SessionResult(s, Status.TIMEOUT, tick=tick, reason="no outcome before horizon"))


def final_status(results: Iterable[SessionResult], session: str) -> SessionResult:
    """ACCEPTED if the session was ever accepted, else its first rejection, else TIMEOUT."""
    mine = [r for r in results if r.session == session]
    for r in mine:
        if r.status is Status.ACCEPTED:
            return r
    if mine:
        return mine[0]
    return SessionResult(session, Status.TIMEOUT)


@dataclass(frozen=True)
class ProtocolParams:
    chunk_width: int = 3
    char_width: int = DEFAULT_CHAR_WIDTH
    delta: int = 10
    timeout: int | None = None
    policy: SplitPolicy = SplitPolicy.INTERLEAVE
    seal_shares: bool = True
    seed: int = 0
    # (party, offset) pairs added to that party's reading of the clock
    clock_skew: tuple[tuple[str, int], ...] = ()

    @property
    def wait_limit(self) -> int:
        return self.timeout if self.timeout is not None else 5 * self.delta

    def skew(self, party: str) -> int:
        return dict(self.clock_skew).get(party, 0)


@dataclass(frozen=True)
class Provision:
    keys: frozenset[str] = frozenset()
    grammar: bool = False
    chunk_width: bool = False


def long_term_key_id(principal: str) -> str:
    return f"K_{principal}"


def default_provisioning(principals: dict[str, str]) -> dict[str, Provision]:
    """Observation table: principals hold their key and the grammar, agents only the key."""
    table: dict[str, Provision] = {}
    kdc_keys = set()
    for principal, agent in principals.items():
        kid = long_term_key_id(principal)
        kdc_keys.add(kid)
        table[principal] = Provision(frozenset({kid}), grammar=True, chunk_width=True)
        table[agent] = Provision(frozenset({kid}))
    table[KDC] = Provision(frozenset(kdc_keys))
    return table


def standard_links(
    principals: dict[str, str],
    latency: int = 1,
    overrides: dict[tuple[str, str], int] | None = None,
    with_kdc: bool = True,
) -> list[Link]:
    """Full mesh; a link is secure exactly when both ends belong to one principal."""
    owner = {}
    for principal, agent in principals.items():
        owner[principal] = principal
        owner[agent] = principal
    names = list(owner)
    if with_kdc:
        names.append(KDC)
        owner[KDC] = KDC
    overrides = overrides or {}
    links = []
    for src in names:
        for dst in names:
            if src != dst:
                secure = owner[src] == owner[dst]
                links.append(Link(src, dst, secure, overrides.get((src, dst), latency)))
    return links


class Malformed(Exception):
    pass


def _atom(term: Term, kind: str):
    if not isinstance(term, Atom) or term.kind != kind:
        raise Malformed(f"expected {kind} atom")
    return term.value


def _tup(term: Term, n: int) -> tuple[Term, ...]:
    if not isinstance(term, Tup) or len(term) != n:
        raise Malformed(f"expected {n}-tuple")
    return term.items


def _share(term: Term, role: Role) -> Share:
    share = _atom(term, "share")
    if not isinstance(share, Share) or share.role is not role:
        raise Malformed(f"expected {role.value} share")
    return share


class Node:
    """Common state of a modified-protocol party."""

    def __init__(
        self,
        name: str,
        principal: str,
        ctx: CryptoContext,
        log: OutcomeLog,
        params: ProtocolParams,
        provision: Provision,
        agents: dict[str, str],
    ) -> None:
        self.name = name
        self.principal = principal
        self.ctx = ctx
        self.log = log
        self.params = params
        self.provision = provision
        self.agents = agents
        self.keys: dict[str, SymKey] = {kid: ctx.registry.get(kid) for kid in provision.keys}
        self.handlers: dict[MsgType, Callable[[ProtocolMessage, Network], None]] = {}

    def held_key_ids(self) -> set[str]:
        return set(self.keys)

    def clock(self, net: Network) -> int:
        return net.now + self.params.skew(self.name)

    def fresh(self, net: Network, t_b: int) -> bool:
        return abs(self.clock(net) - t_b) <= self.params.delta

    def send(self, net: Network, receiver: str, msg_type: MsgType, payload: Term, session: str) -> None:
        net.send(ProtocolMessage(msg_type, payload, self.name, receiver, session))

    def reject(self, net: Network, msg: ProtocolMessage, status: Status, reason: str) -> None:
        self.log.record(net, msg.session, status, self.name, reason)

    def own_key(self, principal: str) -> SymKey:
        kid = long_term_key_id(principal)
        if kid not in self.keys:
            raise ConfigError(f"{self.name} does not hold {kid}")
        return self.keys[kid]

    def on_message(self, msg: ProtocolMessage, net: Network) -> None:
        handler = self.handlers.get(msg.msg_type)
        if handler is None:
            self.reject(net, msg, Status.REJECTED_INTEGRITY, f"unexpected {msg.msg_type.value}")
            return
        try:
            handler(msg, net)
        except (Malformed, EnvelopeError) as exc:
            self.reject(net, msg, Status.REJECTED_INTEGRITY, str(exc) or type(exc).__name__)


class Initiator(Node):
    """Party A: encodes, splits and launches a session."""

    def start(self, net: Network, session: str, message: str, responder: str) -> None:
        if not (self.provision.grammar and self.provision.chunk_width):
            raise ConfigError(f"{self.name} is not provisioned with the grammar")
        p = self.params
        seq = encode_text(message, chunk_grammar(p.chunk_width), p.char_width)
        salt = self.ctx.random_bytes(SALT_BYTES) if p.seal_shares else None
        tag = self.ctx.random_bytes(8).hex()
        v_aa, v_ab = split(seq, tag, p.policy, salt)
        n_a = self.ctx.fresh_nonce(self.name).atom()
        id_a, id_b = ident(self.principal), ident(responder)
        k_a = self.own_key(self.principal)
        self.send(net, self.agents[responder], MsgType.SHARE_TO_BB, Atom("share", v_ab), session)
        self.send(net, self.agents[self.principal], MsgType.AGENT_BRIEF, Tup(Atom("share", v_aa), id_b, n_a), session)
        self.send(net, KDC, MsgType.A_TO_KDC, self.ctx.encrypt(k_a, Tup(id_a, id_b, n_a)), session)


class ResponderAgent(Node):
    """BB: turns the clear share into an authenticated request to the KDC."""

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.seen_shares: set[Share] = set()
        self.handlers[MsgType.SHARE_TO_BB] = self.on_share

    def on_share(self, msg: ProtocolMessage, net: Network) -> None:
        v_ab = _share(msg.payload, Role.EVEN)
        if v_ab in self.seen_shares:
            self.reject(net, msg, Status.REJECTED_REPLAY, "share already forwarded")
            return
        self.seen_shares.add(v_ab)
        n_b = self.ctx.fresh_nonce(self.name).atom()
        t_b = Atom("time", self.clock(net))
        k_b = self.own_key(self.principal)
        body = Tup(ident(self.principal), n_b, t_b, Atom("share", v_ab))
        self.send(net, KDC, MsgType.BB_TO_KDC, self.ctx.encrypt(k_b, body), msg.session)
        self.send(net, self.principal, MsgType.BB_BRIEF_B, Tup(n_b, t_b), msg.session)


@dataclass
class PendingM1:
    id_a: str
    id_b: str
    nonce_a: Atom
    tick: int
    session: str


@dataclass
class PendingM2:
    id_b: str
    nonce_b: Atom
    t_b: int
    share: Share
    tick: int
    session: str


class PendingTable:
    """Unmatched KDC requests; entries older than ``ttl`` ticks are dropped."""

    def __init__(self, ttl: int) -> None:
        self.ttl = ttl
        self.m1: list[PendingM1] = []
        self.m2: list[PendingM2] = []

    def expire(self, now: int) -> list[PendingM1 | PendingM2]:
        dropped = [e for e in (*self.m1, *self.m2) if now - e.tick > self.ttl]
        self.m1 = [e for e in self.m1 if now - e.tick <= self.ttl]
        self.m2 = [e for e in self.m2 if now - e.tick <= self.ttl]
        return dropped

    def offer_m1(self, entry: PendingM1, now: int) -> tuple[PendingM1, PendingM2] | None:
        self.expire(now)
        for m2 in self.m2:
            if m2.id_b == entry.id_b:
                self.m2.remove(m2)
                return entry, m2
        self.m1.append(entry)
        return None

    def offer_m2(self, entry: PendingM2, now: int) -> tuple[PendingM1, PendingM2] | None:
        self.expire(now)
        for m1 in self.m1:
            if m1.id_b == entry.id_b:
                self.m1.remove(m1)
                return m1, entry
        self.m2.append(entry)
        return None


def kdc_match(
    table: PendingTable,
    now: int,
    m1: PendingM1 | None = None,
    m2: PendingM2 | None = None,
) -> tuple[PendingM1, PendingM2] | None:
    """Offer one decrypted request; return the pairing it completes, if any.

    An M2 is paired with the oldest waiting M1 that names its sender as
    ID_B (and symmetrically).  M2 carries no ID_A, so two initiators aiming
    at the same responder in the same instant are paired in arrival order.
    """
    if (m1 is None) == (m2 is None):
        raise ValueError("offer exactly one of m1, m2")
    return table.offer_m1(m1, now) if m1 is not None else table.offer_m2(m2, now)


class KeyDistributionCenter(Node):
    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        self.table = PendingTable(self.params.delta)
        self.seen_nonces: set[Atom] = set()
        self.issued: list[SymKey] = []
        self.handlers[MsgType.A_TO_KDC] = self.on_m1
        self.handlers[MsgType.BB_TO_KDC] = self.on_m2

    def _open(self, payload: Term) -> tuple[SymKey, Term]:
        if not isinstance(payload, Enc):
            raise Malformed("expected ciphertext")
        key = self.keys.get(payload.key_id)
        if key is None:
            raise Malformed(f"no key {payload.key_id}")
        return key, decrypt(key, payload)

    def on_m1(self, msg: ProtocolMessage, net: Network) -> None:
        key, body = self._open(msg.payload)
        id_a, id_b, n_a = _tup(body, 3)
        id_a, id_b = _atom(id_a, "id"), _atom(id_b, "id")
        _atom(n_a, "nonce")
        if key.key_id != long_term_key_id(id_a):
            raise Malformed(f"request for {id_a} sealed under {key.key_id}")
        if n_a in self.seen_nonces:
            self.reject(net, msg, Status.REJECTED_REPLAY, "N_a reused")
            return
        self.seen_nonces.add(n_a)
        pair = kdc_match(self.table, net.now, m1=PendingM1(id_a, id_b, n_a, net.now, msg.session))
        if pair:
            self._issue(net, *pair)

    def on_m2(self, msg: ProtocolMessage, net: Network) -> None:
        key, body = self._open(msg.payload)
        id_b, n_b, t_b, v_ab = _tup(body, 4)
        id_b = _atom(id_b, "id")
        _atom(n_b, "nonce")
        t_b = _atom(t_b, "time")
        share = _share(v_ab, Role.EVEN)
        if key.key_id != long_term_key_id(id_b):
            raise Malformed(f"request from {id_b} sealed under {key.key_id}")
        if n_b in self.seen_nonces:
            self.reject(net, msg, Status.REJECTED_REPLAY, "N_b reused")
            return
        if not self.fresh(net, t_b):
            self.reject(net, msg, Status.REJECTED_STALE, f"T_b={t_b} outside window at {self.clock(net)}")
            return
        self.seen_nonces.add(n_b)
        pair = kdc_match(self.table, net.now, m2=PendingM2(id_b, n_b, t_b, share, net.now, msg.session))
        if pair:
            self._issue(net, *pair)

    def _issue(self, net: Network, m1: PendingM1, m2: PendingM2) -> None:
        k_a = self.own_key(m1.id_a)
        k_b = self.own_key(m2.id_b)
        agent_a = self.agents[m1.id_a]
        k_s = self.ctx.fresh_session_key(agent_a, m2.id_b)
        self.issued.append(k_s)
        for_a = self.ctx.encrypt(
            k_a, Tup(ident(m2.id_b), m1.nonce_a, Atom("time", m2.t_b), key_ref(k_s.key_id), m2.nonce_b)
        )
        ticket = self.ctx.encrypt(k_b, Tup(ident(m1.id_a), key_ref(k_s.key_id), Atom("share", m2.share)))
        self.send(net, agent_a, MsgType.KDC_TO_AA, Tup(for_a, ticket), m1.session)


class InitiatorAgent(Node):
    """AA: checks the KDC reply against A's brief and forwards to B."""

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        # N_a -> (V_AA, ID_B, tick)
        self.briefs: dict[Atom, tuple[Share, str, int]] = {}
        self.consumed: set[Atom] = set()
        self.waiting: list[tuple[ProtocolMessage, int]] = []
        self.handlers[MsgType.AGENT_BRIEF] = self.on_brief
        self.handlers[MsgType.KDC_TO_AA] = self.on_reply

    def _expire(self, now: int) -> None:
        limit = self.params.wait_limit
        self.briefs = {n: b for n, b in self.briefs.items() if now - b[2] <= limit}
        self.waiting = [(m, t) for m, t in self.waiting if now - t <= limit]

    def on_brief(self, msg: ProtocolMessage, net: Network) -> None:
        self._expire(net.now)
        share, id_b, n_a = _tup(msg.payload, 3)
        self.briefs[n_a] = (_share(share, Role.ODD), _atom(id_b, "id"), net.now)
        waiting, self.waiting = self.waiting, []
        for held, _ in waiting:
            self.on_message(held, net)

    def on_reply(self, msg: ProtocolMessage, net: Network) -> None:
        self._expire(net.now)
        for_a, ticket = _tup(msg.payload, 2)
        body = decrypt(self.own_key(self.principal), for_a)
        id_b, n_a, t_b, k_s, n_b = _tup(body, 5)
        id_b, t_b, ks_id = _atom(id_b, "id"), _atom(t_b, "time"), _atom(k_s, "key")
        _atom(n_b, "nonce")
        if n_a in self.consumed:
            self.reject(net, msg, Status.REJECTED_REPLAY, "N_a already answered")
            return
        if n_a not in self.briefs:
            self.waiting.append((msg, net.now))
            return
        v_aa, expected_b, _ = self.briefs[n_a]
        if id_b != expected_b:
            self.reject(net, msg, Status.REJECTED_INTEGRITY, f"reply names {id_b}, brief names {expected_b}")
            return
        if not self.fresh(net, t_b):
            self.reject(net, msg, Status.REJECTED_STALE, f"T_b={t_b} outside window at {self.clock(net)}")
            return
        self.consumed.add(n_a)
        del self.briefs[n_a]
        session_key = self.ctx.registry.get(ks_id)
        self.keys[ks_id] = session_key
        blob = self.ctx.encrypt(session_key, Tup(n_b, Atom("share", v_aa)))
        self.send(net, id_b, MsgType.AA_TO_B, Tup(ticket, blob), msg.session)


class Responder(Node):
    """B: validates message 4, merges the shares and decodes the message."""

    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, **kwargs)
        # N_b -> (T_b, tick)
        self.briefs: dict[Atom, tuple[int, int]] = {}
        self.consumed: set[Atom] = set()
        self.seen: set[Term] = set()
        self.waiting: list[tuple[ProtocolMessage, int]] = []
        self.handlers[MsgType.BB_BRIEF_B] = self.on_brief
        self.handlers[MsgType.AA_TO_B] = self.on_delivery

    def _expire(self, now: int) -> None:
        limit = self.params.wait_limit
        self.briefs = {n: b for n, b in self.briefs.items() if now - b[1] <= limit}
        self.waiting = [(m, t) for m, t in self.waiting if now - t <= limit]

    def on_brief(self, msg: ProtocolMessage, net: Network) -> None:
        self._expire(net.now)
        n_b, t_b = _tup(msg.payload, 2)
        _atom(n_b, "nonce")
        self.briefs[n_b] = (_atom(t_b, "time"), net.now)
        waiting, self.waiting = self.waiting, []
        for held, _ in waiting:
            self._complete(held, net)

    def on_delivery(self, msg: ProtocolMessage, net: Network) -> None:
        self._expire(net.now)
        if msg.payload in self.seen:
            self.reject(net, msg, Status.REJECTED_REPLAY, "message 4 seen before")
            return
        self.seen.add(msg.payload)
        self._complete(msg, net)

    def _complete(self, msg: ProtocolMessage, net: Network) -> None:
        try:
            self._finish(msg, net)
        except (Malformed, EnvelopeError) as exc:
            self.reject(net, msg, Status.REJECTED_INTEGRITY, str(exc) or type(exc).__name__)

    def _finish(self, msg: ProtocolMessage, net: Network) -> None:
        if not (self.provision.grammar and self.provision.chunk_width):
            raise ConfigError(f"{self.name} is not provisioned with the grammar")
        ticket, blob = _tup(msg.payload, 2)
        id_a, k_s, v_ab = _tup(decrypt(self.own_key(self.principal), ticket), 3)
        _atom(id_a, "id")
        ks_id = _atom(k_s, "key")
        v_ab = _share(v_ab, Role.EVEN)
        session_key = self.ctx.registry.get(ks_id)
        n_b, v_aa = _tup(decrypt(session_key, blob), 2)
        _atom(n_b, "nonce")
        v_aa = _share(v_aa, Role.ODD)
        self.keys[ks_id] = session_key
        if n_b in self.consumed:
            self.reject(net, msg, Status.REJECTED_REPLAY, "N_b already used")
            return
        if n_b not in self.briefs:
            self.waiting.append((msg, net.now))
            return
        t_b, _ = self.briefs[n_b]
        if not self.fresh(net, t_b):
            self.reject(net, msg, Status.REJECTED_STALE, f"T_b={t_b} outside window at {self.clock(net)}")
            return
        p = self.params
        try:
            text = decode(merge(v_aa, v_ab, p.policy), chunk_grammar(p.chunk_width), p.char_width)
        except (ShareMismatch, CodecError) as exc:
            self.reject(net, msg, Status.REJECTED_INTEGRITY, str(exc))
            return
        self.consumed.add(n_b)
        del self.briefs[n_b]
        self.log.record(net, msg.session, Status.ACCEPTED, self.name, message=text)


@dataclass
class ModifiedDeployment:
    """All parties of the modified protocol installed on one network."""

    net: Network
    ctx: CryptoContext
    log: OutcomeLog
    params: ProtocolParams
    agents: dict[str, str]
    parties: dict[str, Node] = field(default_factory=dict)

    def start(self, session: str, initiator: str, responder: str, message: str, tick: int = 0) -> None:
        if initiator not in self.agents or responder not in self.agents:
            raise ConfigError(f"unknown principal in session {session}: {initiator}->{responder}")
        party = self.parties[initiator]
        assert isinstance(party, Initiator)
        # fail on unencodable text before anything is scheduled
        encode_text(message, chunk_grammar(self.params.chunk_width), self.params.char_width)
        self.net.transcript.sessions[session] = message
        self.net.call_at(tick, lambda: party.start(self.net, session, message, responder))

    def held_keys(self) -> dict[str, set[str]]:
        return {name: p.held_key_ids() for name, p in self.parties.items()}


def deploy_modified(
    net: Network,
    params: ProtocolParams,
    principals: dict[str, str],
    initiators: Iterable[str],
    provisioning: dict[str, Provision] | None = None,
) -> ModifiedDeployment:
    """Create keys and parties; ``principals`` maps each principal to its agent."""
    ctx = CryptoContext(random.Random(params.seed), clock=lambda: net.now)
    for principal, agent in principals.items():
        ctx.long_term_key(long_term_key_id(principal), principal, agent, KDC)
    provisioning = provisioning or default_provisioning(principals)
    log = OutcomeLog()
    dep = ModifiedDeployment(net, ctx, log, params, dict(principals))
    initiators = set(initiators)
    for principal, agent in principals.items():
        args = (ctx, log, params)
        cls_p = Initiator if principal in initiators else Responder
        cls_a = InitiatorAgent if principal in initiators else ResponderAgent
        dep.parties[principal] = cls_p(principal, principal, *args, provisioning[principal], dep.agents)
        dep.parties[agent] = cls_a(agent, principal, *args, provisioning[agent], dep.agents)
    dep.parties[KDC] = KeyDistributionCenter(KDC, KDC, ctx, log, params, provisioning[KDC], dep.agents)
    for party in dep.parties.values():
        net.add(party)
    return dep


def run_modified_protocol(
    message: str,
    params: ProtocolParams | None = None,
    network: Network | None = None,
    session: str = "s1",
) -> SessionResult:
    """One A -> B session of the modified protocol, run to completion."""
    params = params or ProtocolParams()
    principals = {"A": "AA", "B": "BB"}
    if network is None:
        network = Network(standard_links(principals))
    if network.horizon is None:
        network.horizon = params.wait_limit
    dep = deploy_modified(network, params, principals, initiators={"A"})
    dep.start(session, "A", "B", message)
    network.run()
    dep.log.close([session], network.now)
    return final_status(dep.log.results, session)


# --- three-stage protocol -------------------------------------------------

THREE_STAGE_KNOWLEDGE = {
    # each party's transformations, as (key, direction)
    "basic": {
        "A": {("a", "apply")},
        "AA": {("a", "invert")},
        "B": {("b", "invert")},
        "BB": {("b", "apply")},
    },
    "multilocated": {
        "A": {("a", "apply"), ("a", "invert")},
        "AA": {("a", "invert")},
        "B": {("b", "apply"), ("b", "invert")},
        "BB": {("b", "apply")},
    },
}


class StageParty:
    """A three-stage participant holding only its row of transformations."""

    def __init__(
        self,
        name: str,
        keys: dict[str, TransformKey],
        capabilities: set[tuple[str, str]],
        log: OutcomeLog,
        step: tuple[MsgType, tuple[str, str], MsgType | None, str | None] | None = None,
    ) -> None:
        self.name = name
        self.capabilities = frozenset(capabilities)
        # only keys the party may use in at least one direction
        used = {k for k, _ in capabilities}
        self.keys = {k: v for k, v in keys.items() if k in used}
        self.log = log
        self.step = step
        self.expect_text: dict[str, bool] = {}

    def transform(self, which: str, direction: str, s: SymbolStream) -> SymbolStream:
        if (which, direction) not in self.capabilities:
            raise ConfigError(f"{self.name} may not {direction} with key {which}")
        fn = apply if direction == "apply" else invert
        return fn(self.keys[which], s)

    def on_message(self, msg: ProtocolMessage, net: Network) -> None:
        if self.step is None or msg.msg_type is not self.step[0]:
            self.log.record(net, msg.session, Status.REJECTED_INTEGRITY, self.name, f"unexpected {msg.msg_type.value}")
            return
        _, (which, direction), out_type, next_hop = self.step
        try:
            stream = _atom(msg.payload, "stream")
            if not isinstance(stream, SymbolStream):
                raise Malformed("expected symbol stream")
            result = self.transform(which, direction, stream)
        except (Malformed, TransformError) as exc:
            self.log.record(net, msg.session, Status.REJECTED_INTEGRITY, self.name, str(exc))
            return
        if out_type is not None and next_hop is not None:
            net.send(ProtocolMessage(out_type, Atom("stream", result), self.name, next_hop, msg.session))
            return
        if self.expect_text.get(msg.session, False):
            try:
                text = unlift(result).decode("utf-8")
            except (TransformError, UnicodeDecodeError) as exc:
                self.log.record(net, msg.session, Status.REJECTED_INTEGRITY, self.name, str(exc))
                return
            self.log.record(net, msg.session, Status.ACCEPTED, self.name, message=text)
        else:
            self.log.record(net, msg.session, Status.ACCEPTED, self.name, stream=result)


@dataclass
class ThreeStageDeployment:
    net: Network
    log: OutcomeLog
    parties: dict[str, StageParty]

    def start(self, session: str, message: str | SymbolStream, domain, tick: int = 0) -> None:
        sender, receiver = self.parties["A"], self.parties["B"]
        if isinstance(message, SymbolStream):
            stream = message
            self.net.transcript.sessions[session] = message
        else:
            stream = lift(message.encode("utf-8"), domain)
            self.net.transcript.sessions[session] = message
        receiver.expect_text[session] = not isinstance(message, SymbolStream)

        def launch() -> None:
            ts1 = sender.transform("a", "apply", stream)
            self.net.send(ProtocolMessage(MsgType.TS1, Atom("stream", ts1), "A", "BB", session))

        self.net.call_at(tick, launch)

    def capabilities(self) -> dict[str, frozenset[tuple[str, str]]]:
        return {name: p.capabilities for name, p in self.parties.items()}


def deploy_three_stage(
    net: Network,
    key_a: TransformKey,
    key_b: TransformKey,
    knowledge: str = "basic",
) -> ThreeStageDeployment:
    if key_a.domain != key_b.domain:
        raise ConfigError("keys must share a modulus")
    try:
        table = THREE_STAGE_KNOWLEDGE[knowledge]
    except KeyError:
        raise ConfigError(f"unknown knowledge assignment {knowledge!r}") from None
    keys = {"a": key_a, "b": key_b}
    log = OutcomeLog()
    steps = {
        "A": None,
        "BB": (MsgType.TS1, ("b", "apply"), MsgType.TS2, "AA"),
        "AA": (MsgType.TS2, ("a", "invert"), MsgType.TS3, "B"),
        "B": (MsgType.TS3, ("b", "invert"), None, None),
    }
    parties = {name: StageParty(name, keys, table[name], log, steps[name]) for name in steps}
    for party in parties.values():
        net.add(party)
    return ThreeStageDeployment(net, log, parties)


def run_three_stage(
    message: str | SymbolStream,
    key_a: TransformKey,
    key_b: TransformKey,
    network: Network | None = None,
    knowledge: str = "basic",
    session: str = "s1",
    horizon: int = 50,
) -> SessionResult:
    """A -> B's agent -> A's agent -> B, then B removes its own transformation."""
    if network is None:
        network = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False))
    if network.horizon is None:
        network.horizon = horizon
    dep = deploy_three_stage(network, key_a, key_b, knowledge)
    dep.start(session, message, key_a.domain)
    network.run()
    dep.log.close([session], network.now)
    return final_status(dep.log.results, session)
