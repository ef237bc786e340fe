"""Adversary knowledge closure.

Starting from observed terms and possessed keys, the closure adds
  * the components of every tuple,
  * the body of every ciphertext whose key is known (keys learned on the way count),
  * the merged production sequence of every ODD/EVEN share pair of one session,
  * the plaintext of every such sequence, when grammar and chunk width are known,
and repeats until nothing new appears.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .envelope import Atom, Enc, Term, Tup
from .errors import CodecError, ShareMismatch
from .grammar import DEFAULT_CHAR_WIDTH, chunk_grammar, decode
from .shares import Role, Share, SplitPolicy, merge


@dataclass(frozen=True)
class KnowledgeSet:
    terms: frozenset[Term]

    def __contains__(self, term: object) -> bool:
        return term in self.terms

    def __len__(self) -> int:
        return len(self.terms)

    def key_ids(self) -> set[str]:
        return {t.value for t in self.terms if isinstance(t, Atom) and t.kind == "key"}

    def knows_text(self, message: str) -> bool:
        return Atom("text", message) in self.terms

    def knows_sequence(self, tokens: Iterable[int]) -> bool:
        return Atom("seq", tuple(tokens)) in self.terms

    def shares(self) -> list[Share]:
        return [t.value for t in self.terms if isinstance(t, Atom) and t.kind == "share"]


def closure(
    observed: Iterable[Term],
    possessed_keys: Iterable[str] = (),
    grammar_known: bool = False,
    k: int | None = None,
    char_width: int = DEFAULT_CHAR_WIDTH,
    policy: SplitPolicy = SplitPolicy.INTERLEAVE,
) -> KnowledgeSet:
    known: set[Term] = set(observed) | {Atom("key", kid) for kid in possessed_keys}
    while True:
        keys = {t.value for t in known if isinstance(t, Atom) and t.kind == "key"}
        derived: set[Term] = set()
        for t in known:
            if isinstance(t, Tup):
                derived.update(t.items)
            elif isinstance(t, Enc) and t.key_id in keys:
                derived.add(t.body)
        shares = [t.value for t in known if isinstance(t, Atom) and t.kind == "share"]
        odds = [s for s in shares if s.role is Role.ODD]
        evens = [s for s in shares if s.role is Role.EVEN]
        for odd in odds:
            for even in evens:
                if odd.session_id != even.session_id:
                    continue
                try:
                    derived.add(Atom("seq", merge(odd, even, policy).tokens))
                except ShareMismatch:
                    continue
        if grammar_known and k is not None:
            g = chunk_grammar(k)
            for t in known:
                if isinstance(t, Atom) and t.kind == "seq":
                    try:
                        derived.add(Atom("text", decode(t.value, g, char_width)))
                    except CodecError:
                        continue
        if derived <= known:
            return KnowledgeSet(frozenset(known))
        known |= derived
