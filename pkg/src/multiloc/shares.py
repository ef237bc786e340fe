"""Two-of-two positional split of a production sequence.

The ODD share (tokens at 1-based odd positions) is V_AA and travels through
A's own agent; the EVEN share is V_AB and goes to B's agent in the clear.

Sealing.  A share pair may be *sealed*: the ODD tag carries a random salt and
the EVEN tag carries ``blake2b(salt || sequence)``.  The salt only ever
travels inside the protected half, so whoever sees the EVEN share alone can
neither recompute nor test the commitment, while the final recipient detects
any change to either half on :func:`merge`.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CodecError, ShareMismatch
from .grammar import DEFAULT_CHAR_WIDTH, ChunkGrammar, ProductionSequence, decode

SALT_BYTES = 16


class Role(enum.Enum):
    ODD = "ODD"
    EVEN = "EVEN"


class SplitPolicy(enum.Enum):
    INTERLEAVE = "INTERLEAVE"
    HALVES = "HALVES"


@dataclass(frozen=True)
class Share:
    role: Role
    tokens: tuple[int, ...]
    total_length: int
    session_tag: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        expected = share_size(self.role, self.total_length)
        if len(self.tokens) != expected:
            raise ShareMismatch(
                f"{self.role.value} share of a {self.total_length}-token sequence "
                f"must hold {expected} tokens, got {len(self.tokens)}"
            )

    @property
    def session_id(self) -> str:
        return self.session_tag.split(".", 1)[0]

    @property
    def binding(self) -> str | None:
        parts = self.session_tag.split(".", 1)
        return parts[1] if len(parts) == 2 else None

    def to_text(self) -> str:
        tokens = ",".join(str(t) for t in self.tokens)
        return f"role={self.role.value} total={self.total_length} tag={self.session_tag} tokens={tokens}"

    @classmethod
    def parse(cls, text: str) -> Share:
        try:
            fields = dict(part.split("=", 1) for part in text.split())
            tokens = tuple(int(t) for t in fields["tokens"].split(",") if t)
            return cls(Role(fields["role"]), tokens, int(fields["total"]), fields["tag"])
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ShareMismatch):
                raise
            raise ShareMismatch(f"bad share text {text!r}: {exc}") from None


def share_size(role: Role, total: int) -> int:
    return (total + 1) // 2 if role is Role.ODD else total // 2


def _positions(role: Role, total: int, policy: SplitPolicy) -> range:
    """0-based positions of ``role``'s tokens in the full sequence."""
    if policy is SplitPolicy.INTERLEAVE:
        return range(0 if role is Role.ODD else 1, total, 2)
    half = (total + 1) // 2
    return range(0, half) if role is Role.ODD else range(half, total)


def _commitment(salt: bytes, tokens: Sequence[int]) -> str:
    body = ",".join(str(t) for t in tokens).encode()
    return hashlib.blake2b(salt + body, digest_size=16).hexdigest()


def split(
    seq: Iterable[int],
    session_tag: str,
    policy: SplitPolicy = SplitPolicy.INTERLEAVE,
    salt: bytes | None = None,
) -> tuple[Share, Share]:
    """Split into (ODD, EVEN) shares; pass ``salt`` to seal the pair."""
    if "." in session_tag:
        raise ValueError("session tag may not contain '.'")
    tokens = tuple(seq)
    n = len(tokens)
    odd_tag = even_tag = session_tag
    if salt is not None:
        odd_tag = f"{session_tag}.{salt.hex()}"
        even_tag = f"{session_tag}.{_commitment(salt, tokens)}"
    odd = Share(Role.ODD, tuple(tokens[i] for i in _positions(Role.ODD, n, policy)), n, odd_tag)
    even = Share(Role.EVEN, tuple(tokens[i] for i in _positions(Role.EVEN, n, policy)), n, even_tag)
    return odd, even


def merge(odd: Share, even: Share, policy: SplitPolicy = SplitPolicy.INTERLEAVE) -> ProductionSequence:
    if (odd.role, even.role) != (Role.ODD, Role.EVEN):
        raise ShareMismatch(f"need an (ODD, EVEN) pair, got ({odd.role.value}, {even.role.value})")
    if odd.total_length != even.total_length:
        raise ShareMismatch(f"total lengths differ: {odd.total_length} != {even.total_length}")
    if odd.session_id != even.session_id:
        raise ShareMismatch(f"session tags differ: {odd.session_id} != {even.session_id}")
    n = odd.total_length
    tokens: list[int] = [0] * n
    for role, share in ((Role.ODD, odd), (Role.EVEN, even)):
        for pos, tok in zip(_positions(role, n, policy), share.tokens):
            tokens[pos] = tok
    if (odd.binding is None) != (even.binding is None):
        raise ShareMismatch("only one share of the pair is sealed")
    if odd.binding is not None:
        try:
            salt = bytes.fromhex(odd.binding)
        except ValueError:
            raise ShareMismatch("malformed seal salt") from None
        if _commitment(salt, tokens) != even.binding:
            raise ShareMismatch("shares do not match their seal")
    return ProductionSequence(tokens)


def candidate_messages(
    share: Share,
    g: ChunkGrammar,
    char_width: int = DEFAULT_CHAR_WIDTH,
    policy: SplitPolicy = SplitPolicy.INTERLEAVE,
) -> set[str]:
    """Every message consistent with one share, by exhaustive search over complements.

    The complement's tokens are enumerated position by position in derivation
    order; a candidate rule whose lhs is not the current leftmost nonterminal
    can never be part of a legal derivation, so only those branches are cut.
    Seals are ignored: this measures what the token structure reveals.
    """
    n = share.total_length
    known = dict(zip(_positions(share.role, n, policy), share.tokens))
    grammar = g.grammar
    by_lhs: dict[str, list[int]] = {}
    for prod in grammar.productions:
        by_lhs.setdefault(prod.lhs, []).append(prod.index)
    found: set[str] = set()

    def walk(pos: int, stack: tuple[str, ...], tokens: tuple[int, ...]) -> None:
        while stack and stack[-1] in grammar.terminals:
            stack = stack[:-1]
        if pos == n:
            if not stack:
                try:
                    found.add(decode(tokens, g, char_width))
                except CodecError:
                    pass
            return
        if not stack:
            return
        choices = [known[pos]] if pos in known else by_lhs.get(stack[-1], [])
        for idx in choices:
            try:
                prod = grammar.rule(idx)
            except CodecError:
                return
            if prod.lhs != stack[-1]:
                continue
            walk(pos + 1, stack[:-1] + tuple(reversed(prod.rhs)), tokens + (idx,))

    walk(0, (grammar.start,), ())
    return found


def candidate_messages_exhaustive(
    share: Share,
    g: ChunkGrammar,
    char_width: int = DEFAULT_CHAR_WIDTH,
    policy: SplitPolicy = SplitPolicy.INTERLEAVE,
) -> set[str]:
    """Unpruned variant: try every complement in ``[1, N]**m``.  Small inputs only."""
    other = Role.EVEN if share.role is Role.ODD else Role.ODD
    m = share_size(other, share.total_length)
    found: set[str] = set()
    for combo in itertools.product(range(1, g.rule_count + 1), repeat=m):
        comp = Share(other, combo, share.total_length, share.session_id)
        plain = Share(share.role, share.tokens, share.total_length, share.session_id)
        pair = (plain, comp) if share.role is Role.ODD else (comp, plain)
        try:
            found.add(decode(merge(*pair, policy=policy), g, char_width))
        except CodecError:
            continue
    return found
