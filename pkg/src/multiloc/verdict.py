"""Pass/fail verdicts for the security claims, computed from a finished run."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .adversary import Adversary
from .errors import CodecError, ShareMismatch
from .grammar import DEFAULT_CHAR_WIDTH, chunk_grammar, decode
from .knowledge import closure
from .network import Transcript
from .protocol import SessionResult, Status
from .shares import Role, SplitPolicy, merge


class Claim(enum.Enum):
    MIM_RESIST = "MIM_RESIST"
    REPLAY_RESIST = "REPLAY_RESIST"
    SHARE_SECRECY = "SHARE_SECRECY"
    DOS_SAFETY = "DOS_SAFETY"


@dataclass(frozen=True)
class VerdictReport:
    claim: Claim
    passed: bool
    witnesses: tuple[int, ...] = ()
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        wit = ",".join(str(w) for w in self.witnesses) or "-"
        return f"verdict {self.claim.value} {status} witnesses={wit} {self.detail}".rstrip()


def _wrong_accepts(transcript: Transcript, results: Iterable[SessionResult]) -> list[SessionResult]:
    bad = []
    for r in results:
        if r.status is Status.ACCEPTED and r.delivered != transcript.sessions.get(r.session):
            bad.append(r)
    return bad


def _adv_events(transcript: Transcript, tags: Sequence[str]) -> tuple[int, ...]:
    return tuple(e.seq for e in transcript if e.adv in tags)


def attack_verdict(
    transcript: Transcript,
    results: Sequence[SessionResult],
    claim: Claim,
    adversary: Adversary | None = None,
    chunk_width: int | None = None,
    char_width: int = DEFAULT_CHAR_WIDTH,
    policy: SplitPolicy = SplitPolicy.INTERLEAVE,
) -> VerdictReport:
    if claim is Claim.MIM_RESIST:
        bad = _wrong_accepts(transcript, results)
        if bad:
            return VerdictReport(claim, False, tuple(r.transcript_ref for r in bad), f"{len(bad)} wrong accept(s)")
        wit = _adv_events(transcript, ("substitute", "suppress", "relay"))
        return VerdictReport(claim, True, wit, "no accepted message differs from its input")

    if claim is Claim.REPLAY_RESIST:
        accepts = Counter(r.session for r in results if r.status is Status.ACCEPTED)
        off = {s: accepts.get(s, 0) for s in transcript.sessions if accepts.get(s, 0) != 1}
        replays = _adv_events(transcript, ("replay",))
        rejected = tuple(r.transcript_ref for r in results if r.status is Status.REJECTED_REPLAY)
        if off:
            detail = " ".join(f"{s}:{n}" for s, n in sorted(off.items()))
            return VerdictReport(claim, False, replays, f"sessions without exactly one accept: {detail}")
        return VerdictReport(
            claim, True, tuple(sorted(set(replays + rejected))), f"{len(replays)} replay(s) injected, {len(rejected)} rejected as replay"
        )

    if claim is Claim.DOS_SAFETY:
        bad = _wrong_accepts(transcript, results)
        finals = {}
        for r in results:
            finals.setdefault(r.session, r.status)
            if r.status is Status.ACCEPTED:
                finals[r.session] = r.status
        delivered = sum(1 for s in transcript.sessions if finals.get(s) is Status.ACCEPTED)
        liveness = "held" if delivered == len(transcript.sessions) else "lost"
        wit = _adv_events(transcript, ("drop", "flood"))
        if bad:
            return VerdictReport(claim, False, tuple(r.transcript_ref for r in bad), "wrong accept under DoS")
        return VerdictReport(
            claim, True, wit, f"liveness {liveness} ({delivered}/{len(transcript.sessions)} delivered)"
        )

    if claim is Claim.SHARE_SECRECY:
        if adversary is None:
            return VerdictReport(claim, True, (), "no adversary observations")
        cfg = adversary.config
        k = chunk_width if cfg.knows_grammar else None
        know = closure(adversary.observed_terms(), cfg.keys, cfg.knows_grammar, k, char_width, policy)
        leaks = []
        for session, message in transcript.sessions.items():
            if not isinstance(message, str) or not know.knows_text(message):
                continue
            if not (cfg.knows_grammar and _holds_both_shares(know.shares(), message, chunk_width, char_width, policy)):
                leaks.append(session)
        seen = tuple(seq for seq, _ in adversary.observed)
        if leaks:
            return VerdictReport(claim, False, seen, f"plaintext leaked without both shares: {','.join(leaks)}")
        learned = sum(1 for m in transcript.sessions.values() if isinstance(m, str) and know.knows_text(m))
        return VerdictReport(claim, True, seen, f"{learned}/{len(transcript.sessions)} plaintext(s) derivable")

    raise ValueError(f"unknown claim {claim}")


def _holds_both_shares(shares, message: str, k: int | None, char_width: int, policy: SplitPolicy) -> bool:
    if k is None:
        return False
    g = chunk_grammar(k)
    for odd in (s for s in shares if s.role is Role.ODD):
        for even in (s for s in shares if s.role is Role.EVEN):
            try:
                if decode(merge(odd, even, policy), g, char_width) == message:
                    return True
            except (ShareMismatch, CodecError):
                continue
    return False
