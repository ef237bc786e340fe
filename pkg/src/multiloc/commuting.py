"""Commuting secret transformations: exponentiation modulo a public prime.

``apply(k, x) = x**a mod p`` and ``invert(k, x) = x**a_inv mod p`` with
``a * a_inv = 1 (mod p - 1)``.  Any two keys over the same prime commute,
which is what the three-stage exchange needs.  Elements are processed one at
a time (no chaining); this is a protocol model, not a cipher.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from math import gcd
from typing import Iterable

from .errors import DomainMismatch, DomainTooSmall, TransformError

DEFAULT_MODULUS = 65537


@dataclass(frozen=True)
class TransformDomain:
    p: int = DEFAULT_MODULUS

    def __post_init__(self) -> None:
        from sympy import isprime

        if self.p < 3 or not isprime(self.p):
            raise TransformError(f"modulus must be an odd prime, got {self.p}")

    @property
    def order(self) -> int:
        """Order of the multiplicative group, the modulus for exponents."""
        return self.p - 1


@dataclass(frozen=True)
class TransformKey:
    exponent: int
    inverse_exponent: int
    domain: TransformDomain

    def __post_init__(self) -> None:
        n = self.domain.order
        if not 1 <= self.exponent <= self.domain.p - 2:
            raise TransformError(f"exponent must be in [1, {self.domain.p - 2}]")
        if gcd(self.exponent, n) != 1 or (self.exponent * self.inverse_exponent) % n != 1:
            raise TransformError(f"exponent {self.exponent} is not invertible modulo {n}")

    @classmethod
    def from_exponent(cls, exponent: int, domain: TransformDomain) -> TransformKey:
        if gcd(exponent, domain.order) != 1:
            raise TransformError(f"gcd({exponent}, {domain.order}) != 1")
        return cls(exponent, pow(exponent, -1, domain.order), domain)

    def to_text(self) -> str:
        return f"p={self.domain.p} a={self.exponent}"

    @classmethod
    def parse(cls, text: str) -> TransformKey:
        fields = dict(part.split("=", 1) for part in text.split())
        try:
            return cls.from_exponent(int(fields["a"]), TransformDomain(int(fields["p"])))
        except (KeyError, ValueError) as exc:
            raise TransformError(f"bad key text {text!r}: {exc}") from None


@dataclass(frozen=True)
class SymbolStream:
    elements: tuple[int, ...]
    domain: TransformDomain

    def __post_init__(self) -> None:
        object.__setattr__(self, "elements", tuple(self.elements))
        bad = [x for x in self.elements if not 1 <= x < self.domain.p]
        if bad:
            raise TransformError(f"stream elements must lie in [1, {self.domain.p - 1}]: {bad[:5]}")

    def __len__(self) -> int:
        return len(self.elements)


def keygen(domain: TransformDomain, rng: random.Random) -> TransformKey:
    """Draw an exponent uniformly among those in [1, p-2] coprime to p-1."""
    while True:
        a = rng.randint(1, domain.p - 2)
        if gcd(a, domain.order) == 1:
            return TransformKey.from_exponent(a, domain)


def lift(message: bytes, domain: TransformDomain) -> SymbolStream:
    if domain.p <= 256:
        raise DomainTooSmall(f"byte lifting needs p > 256, got {domain.p}")
    return SymbolStream(tuple(b + 1 for b in message), domain)


def unlift(stream: SymbolStream) -> bytes:
    values = [x - 1 for x in stream.elements]
    if any(v > 255 for v in values):
        raise TransformError("stream holds residues that are not lifted bytes")
    return bytes(values)


def lift_chunks(chunks: Iterable[int], k: int, domain: TransformDomain) -> SymbolStream:
    if domain.p <= 2**k:
        raise DomainTooSmall(f"{k}-bit chunk lifting needs p > {2**k}, got {domain.p}")
    return SymbolStream(tuple(c + 1 for c in chunks), domain)


def unlift_chunks(stream: SymbolStream, k: int) -> list[int]:
    values = [x - 1 for x in stream.elements]
    if any(v >= 2**k for v in values):
        raise TransformError(f"stream holds residues that are not {k}-bit chunks")
    return values


def _check(key: TransformKey, s: SymbolStream) -> None:
    if key.domain != s.domain:
        raise DomainMismatch(f"key modulus {key.domain.p} != stream modulus {s.domain.p}")


def apply(key: TransformKey, s: SymbolStream) -> SymbolStream:
    _check(key, s)
    p = s.domain.p
    return SymbolStream(tuple(pow(x, key.exponent, p) for x in s.elements), s.domain)


def invert(key: TransformKey, s: SymbolStream) -> SymbolStream:
    _check(key, s)
    p = s.domain.p
    return SymbolStream(tuple(pow(x, key.inverse_exponent, p) for x in s.elements), s.domain)
