"""Grammar-based linguistic transformation of messages.

A message becomes a bit string (fixed-width character codes), the bit string
is cut into k-bit chunks, and the chunks are written as the rule indices of a
leftmost derivation in a small context-free "chunk grammar"::

    1  S -> B B
    2  B -> A B
    3  B -> eps
    4  A -> 0...0        (k bits)
    ...
    3 + 2**k  A -> 1...1

The derivation is canonical: after rule 1 the first ceil(n/2) chunks are
derived under the first B and the rest under the second B.  Decoding replays
the derivation and recovers the zero padding from the derived length, which
works without any header because k never exceeds the character width.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import CodePointOverflow, GrammarError, IllegalDerivation, NonZeroPadding

EPSILON = "eps"
DEFAULT_CHAR_WIDTH = 7
MAX_CHUNK_WIDTH = 7


@dataclass(frozen=True)
class Production:
    index: int
    lhs: str
    rhs: tuple[str, ...]

    def __str__(self) -> str:
        body = "".join(self.rhs) if self.rhs else EPSILON
        return f"{self.index}: {self.lhs} -> {body}"


@dataclass(frozen=True)
class Grammar:
    """The quadruple (variables, terminals, productions, start)."""

    variables: frozenset[str]
    terminals: frozenset[str]
    productions: tuple[Production, ...]
    start: str
    _by_index: dict[int, Production] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.variables & self.terminals:
            raise GrammarError(
                f"symbols are both variable and terminal: {sorted(self.variables & self.terminals)}"
            )
        if self.start not in self.variables:
            raise GrammarError(f"start symbol {self.start!r} is not a variable")
        symbols = self.variables | self.terminals
        for pos, prod in enumerate(self.productions, start=1):
            if prod.index != pos:
                raise GrammarError(f"production indices must be 1..N in order; got {prod.index} at {pos}")
            if prod.lhs not in self.variables:
                raise GrammarError(f"rule {prod.index}: lhs {prod.lhs!r} is not a variable")
            unknown = [s for s in prod.rhs if s not in symbols]
            if unknown:
                raise GrammarError(f"rule {prod.index}: unknown rhs symbols {unknown}")
        object.__setattr__(self, "_by_index", {p.index: p for p in self.productions})

    def rule(self, index: int) -> Production:
        try:
            return self._by_index[index]
        except KeyError:
            raise IllegalDerivation(f"no production with index {index}") from None

    def __len__(self) -> int:
        return len(self.productions)

    def to_text(self) -> str:
        return "\n".join(str(p) for p in self.productions) + "\n"

    @classmethod
    def from_rules(cls, rules: Iterable[tuple[str, Sequence[str]]], start: str = "S") -> Grammar:
        """Build a grammar from (lhs, rhs) pairs numbered 1..N in order.

        Variables are the symbols that appear on some left-hand side; every
        other right-hand-side symbol is a terminal.
        """
        prods = tuple(Production(i, lhs, tuple(rhs)) for i, (lhs, rhs) in enumerate(rules, start=1))
        variables = frozenset(p.lhs for p in prods) | {start}
        terminals = frozenset(s for p in prods for s in p.rhs if s not in variables)
        return cls(variables, terminals, prods, start)

    @classmethod
    def parse(cls, text: str, start: str = "S") -> Grammar:
        """Parse the line format ``index: LHS -> RHS`` (``eps`` for the empty string).

        Every character of RHS is one symbol; whitespace is ignored.
        """
        rules: list[tuple[str, tuple[str, ...]]] = []
        line_re = re.compile(r"^\s*(\d+)\s*:\s*(\S+)\s*->\s*(.*?)\s*$")
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = line_re.match(line)
            if not m:
                raise GrammarError(f"line {lineno}: expected 'index: LHS -> RHS', got {raw!r}")
            index, lhs, rhs = int(m.group(1)), m.group(2), m.group(3)
            if index != len(rules) + 1:
                raise GrammarError(f"line {lineno}: index {index} out of order")
            body = () if rhs in (EPSILON, "") else tuple(rhs.replace(" ", ""))
            rules.append((lhs, body))
        return cls.from_rules(rules, start=start)


@dataclass(frozen=True)
class ChunkGrammar:
    """Canonical chunk grammar for k-bit chunks (3 + 2**k productions)."""

    k: int
    grammar: Grammar

    @property
    def rule_count(self) -> int:
        return len(self.grammar)

    def chunk_rule(self, value: int) -> int:
        return 4 + value

    def chunk_value(self, index: int) -> int:
        return index - 4


@lru_cache(maxsize=None)
def chunk_grammar(k: int) -> ChunkGrammar:
    if not 1 <= k <= MAX_CHUNK_WIDTH:
        raise GrammarError(f"chunk width must be in [1, {MAX_CHUNK_WIDTH}], got {k}")
    rules: list[tuple[str, tuple[str, ...]]] = [
        ("S", ("B", "B")),
        ("B", ("A", "B")),
        ("B", ()),
    ]
    rules += [("A", tuple(format(v, f"0{k}b"))) for v in range(2**k)]
    return ChunkGrammar(k, Grammar.from_rules(rules, start="S"))


@dataclass(frozen=True)
class BitString:
    bits: str
    char_width: int = DEFAULT_CHAR_WIDTH

    def __post_init__(self) -> None:
        if self.bits.strip("01"):
            raise ValueError("bit string may only contain '0' and '1'")

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return self.bits


@dataclass(frozen=True)
class ProductionSequence:
    tokens: tuple[int, ...]

    def __init__(self, tokens: Iterable[int]) -> None:
        object.__setattr__(self, "tokens", tuple(int(t) for t in tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def to_text(self) -> str:
        return format_sequence(self.tokens)


def _as_bits(bits: BitString | str) -> str:
    return bits.bits if isinstance(bits, BitString) else BitString(bits).bits


def text_to_bits(text: str, char_width: int = DEFAULT_CHAR_WIDTH) -> BitString:
    if not 1 <= char_width <= 8:
        raise ValueError(f"char width must be in [1, 8], got {char_width}")
    out = []
    for ch in text:
        code = ord(ch)
        if code >= 1 << char_width:
            raise CodePointOverflow(f"{ch!r} (code point {code}) does not fit in {char_width} bits")
        out.append(format(code, f"0{char_width}b"))
    return BitString("".join(out), char_width)


def bits_to_text(bits: BitString | str, char_width: int = DEFAULT_CHAR_WIDTH) -> str:
    raw = _as_bits(bits)
    if len(raw) % char_width:
        raise IllegalDerivation(f"{len(raw)} bits is not a whole number of {char_width}-bit characters")
    return "".join(chr(int(raw[i : i + char_width], 2)) for i in range(0, len(raw), char_width))


def bits_to_chunks(bits: BitString | str, k: int) -> tuple[list[int], int]:
    """Cut bits into k-bit chunks, zero-padding the tail. Returns (chunks, pad_bits)."""
    if not 1 <= k <= MAX_CHUNK_WIDTH:
        raise ValueError(f"chunk width must be in [1, {MAX_CHUNK_WIDTH}], got {k}")
    raw = _as_bits(bits)
    pad = (k - len(raw) % k) % k
    raw += "0" * pad
    return [int(raw[i : i + k], 2) for i in range(0, len(raw), k)], pad


def encode(bits: BitString | str, g: ChunkGrammar) -> ProductionSequence:
    chunks, _ = bits_to_chunks(bits, g.k)
    half = (len(chunks) + 1) // 2
    tokens = [1]
    for part in (chunks[:half], chunks[half:]):
        for value in part:
            tokens += [2, g.chunk_rule(value)]
        tokens.append(3)
    return ProductionSequence(tokens)


def encode_text(text: str, g: ChunkGrammar, char_width: int = DEFAULT_CHAR_WIDTH) -> ProductionSequence:
    return encode(text_to_bits(text, char_width), g)


def derive(seq: Iterable[int], grammar: Grammar) -> tuple[str, ...]:
    """Replay ``seq`` as a leftmost derivation and return the derived terminals.

    Raises IllegalDerivation if a rule's lhs is not the leftmost nonterminal,
    if tokens remain after the sentential form is all terminals, or if
    nonterminals remain when the tokens run out.
    """
    out: list[str] = []
    # Right-to-left stack of the unexpanded suffix of the sentential form.
    stack = [grammar.start]
    for pos, token in enumerate(seq, start=1):
        while stack and stack[-1] in grammar.terminals:
            out.append(stack.pop())
        if not stack:
            raise IllegalDerivation(f"token {pos} ({token}) follows a complete derivation")
        prod = grammar.rule(token)
        if prod.lhs != stack[-1]:
            raise IllegalDerivation(
                f"token {pos}: rule {token} rewrites {prod.lhs} but leftmost nonterminal is {stack[-1]}"
            )
        stack.pop()
        stack.extend(reversed(prod.rhs))
    while stack and stack[-1] in grammar.terminals:
        out.append(stack.pop())
    if stack:
        raise IllegalDerivation(f"derivation incomplete; nonterminals left: {''.join(reversed(stack))}")
    return tuple(out)


def derive_bits(seq: Iterable[int], g: ChunkGrammar) -> BitString:
    return BitString("".join(derive(seq, g.grammar)))


def decode(seq: Iterable[int], g: ChunkGrammar, char_width: int = DEFAULT_CHAR_WIDTH) -> str:
    if g.k > char_width:
        raise ValueError(f"chunk width {g.k} exceeds char width {char_width}; padding is not recoverable")
    bits = derive_bits(seq, g).bits
    pad = len(bits) % char_width
    if pad:
        if "1" in bits[-pad:]:
            raise NonZeroPadding(f"implied {pad} pad bits {bits[-pad:]!r} are not all zero")
        bits = bits[:-pad]
    return bits_to_text(bits, char_width)


def render_concatenated(seq: Iterable[int]) -> str:
    """Legacy display form: indices run together without separators.

    Not invertible once any index has two digits ("1,11" and "11,1" both
    render as "111"); use :func:`format_sequence` for anything machine-read.
    """
    return "".join(str(t) for t in seq)


def format_sequence(seq: Iterable[int]) -> str:
    return ",".join(str(t) for t in seq)


def parse_sequence(text: str) -> ProductionSequence:
    text = text.strip()
    if not text:
        return ProductionSequence(())
    try:
        tokens = [int(part) for part in text.split(",")]
    except ValueError:
        raise IllegalDerivation(f"not a comma-separated list of rule indices: {text!r}") from None
    if any(t < 1 for t in tokens):
        raise IllegalDerivation("rule indices start at 1")
    return ProductionSequence(tokens)
