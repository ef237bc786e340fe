"""Deterministic discrete-event network with secure and insecure links.

Every send is recorded as one transcript event at the tick it enters the
wire.  Deliveries are ordered by (tick, insertion order), which together with
a fixed per-link latency gives FIFO delivery on each link.  Traffic on
insecure links passes through the adversary, if one is installed.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Protocol

from .envelope import Term, digest
from .errors import ConfigError
from .messages import ProtocolMessage


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    secure: bool
    latency: int = 1

    @property
    def name(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    tick: int
    sender: str
    receiver: str
    secure: bool
    msg_type: str
    digest: str
    adv: str = "none"
    session: str = field(default="", compare=False)
    payload: Term | None = field(default=None, compare=False, repr=False)

    def line(self) -> str:
        return (
            f"{self.seq}|{self.tick}|{self.sender}->{self.receiver}|secure:{int(self.secure)}"
            f"|{self.msg_type}|{self.digest}|adv:{self.adv}"
        )


@dataclass
class Transcript:
    events: list[TranscriptEvent] = field(default_factory=list)
    # session id -> message the initiator set out to deliver
    sessions: dict[str, str] = field(default_factory=dict)

    def __iter__(self) -> Iterator[TranscriptEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def lines(self) -> list[str]:
        return [e.line() for e in self.events]

    def to_text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def msg_types(self) -> list[str]:
        return [e.msg_type for e in self.events]

    def on_link(self, src: str, dst: str) -> list[TranscriptEvent]:
        return [e for e in self.events if e.sender == src and e.receiver == dst]


class Party(Protocol):
    name: str

    def on_message(self, msg: ProtocolMessage, net: Network) -> None: ...


class WireAdversary(Protocol):
    def validate(self, net: Network) -> None: ...

    def intercept(
        self, msg: ProtocolMessage, link: Link, net: Network
    ) -> tuple[ProtocolMessage | None, str, int]: ...


class Network:
    def __init__(
        self,
        links: Iterable[Link],
        adversary: WireAdversary | None = None,
        horizon: int | None = None,
    ) -> None:
        self.links: dict[tuple[str, str], Link] = {}
        for link in links:
            if link.latency < 0:
                raise ConfigError(f"negative latency on {link.name}")
            self.links[(link.src, link.dst)] = link
        self.parties: dict[str, Party] = {}
        self.adversary = adversary
        self.horizon = horizon
        self.transcript = Transcript()
        self.now = 0
        # seq of the transcript event whose delivery is being processed
        self.delivering = 0
        self._queue: list[tuple[int, int, Callable[[], None]]] = []
        self._order = itertools.count()
        self._seq = itertools.count(1)
        self._link_clear: dict[tuple[str, str], int] = {}
        self._validated = False

    def add(self, party: Party) -> Party:
        if party.name in self.parties:
            raise ConfigError(f"duplicate party {party.name}")
        self.parties[party.name] = party
        return party

    def link(self, src: str, dst: str) -> Link:
        try:
            return self.links[(src, dst)]
        except KeyError:
            raise ConfigError(f"no link {src}->{dst}") from None

    def call_at(self, tick: int, fn: Callable[[], None]) -> None:
        heapq.heappush(self._queue, (tick, next(self._order), fn))

    def send(self, msg: ProtocolMessage) -> None:
        link = self.link(msg.sender, msg.receiver)
        out, tag, extra = msg, "none", 0
        if self.adversary is not None and not link.secure:
            out, tag, extra = self.adversary.intercept(msg, link, self)
        self._record(out if out is not None else msg, link, tag)
        if out is not None:
            self._schedule_delivery(out, link, self.now + link.latency + extra)

    def inject(self, msg: ProtocolMessage, tag: str) -> None:
        """Put an adversary-made message on the wire now, bypassing interception."""
        link = self.link(msg.sender, msg.receiver)
        if link.secure:
            raise ConfigError(f"adversary cannot inject on secure link {link.name}")
        self._record(msg, link, tag)
        self._schedule_delivery(msg, link, self.now + link.latency)

    def _record(self, msg: ProtocolMessage, link: Link, tag: str) -> None:
        self.transcript.events.append(
            TranscriptEvent(
                seq=next(self._seq),
                tick=self.now,
                sender=msg.sender,
                receiver=msg.receiver,
                secure=link.secure,
                msg_type=msg.msg_type.value,
                digest=digest(msg.payload),
                adv=tag,
                session=msg.session,
                payload=msg.payload,
            )
        )

    def _schedule_delivery(self, msg: ProtocolMessage, link: Link, tick: int) -> None:
        key = (link.src, link.dst)
        tick = max(tick, self._link_clear.get(key, 0))
        self._link_clear[key] = tick
        seq = self.transcript.events[-1].seq
        party = self.parties.get(msg.receiver)
        if party is None:
            raise ConfigError(f"unknown receiver {msg.receiver}")

        def deliver() -> None:
            self.delivering = seq
            party.on_message(msg, self)

        self.call_at(tick, deliver)

    def run(self) -> Transcript:
        if self.adversary is not None and not self._validated:
            self.adversary.validate(self)
            self._validated = True
        while self._queue:
            tick, _, fn = self._queue[0]
            if self.horizon is not None and tick > self.horizon:
                break
            heapq.heappop(self._queue)
            self.now = tick
            self.delivering = 0
            fn()
        return self.transcript

    @property
    def pending(self) -> int:
        return len(self._queue)
