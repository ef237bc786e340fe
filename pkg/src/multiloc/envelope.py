"""Symbolic authenticated encryption (Dolev-Yao terms) for E(K, [...]) messages.

Terms are immutable trees of :class:`Atom`, :class:`Tup` and :class:`Enc`.
An ``Enc`` is opaque: the only way to its body is :func:`decrypt` with the
key whose id it names, and a wrong key raises instead of returning garbage.
Encryption is deterministic, so a replayed ciphertext compares equal to the
original.

A byte-level backend honouring the same contract (AES-GCM plus a key
commitment, so a wrong key fails loudly) is provided as :class:`ConcreteCipher`.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import random
from dataclasses import dataclass, field
from typing import Any, Iterator, Protocol, Union

from .errors import NotCiphertext, UnknownKey, WrongKey


@dataclass(frozen=True)
class Atom:
    """A leaf term. ``kind`` is one of id, nonce, time, share, key, stream, seq, text, data."""

    kind: str
    value: Any


@dataclass(frozen=True)
class Tup:
    items: tuple[Term, ...]

    def __init__(self, *items: Term) -> None:
        object.__setattr__(self, "items", tuple(items))

    def __iter__(self) -> Iterator[Term]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> Term:
        return self.items[i]


@dataclass(frozen=True)
class Enc:
    key_id: str
    body: Term = field(repr=False)

    def __repr__(self) -> str:
        return f"Enc({self.key_id!r}, <{digest(self.body)}>)"


Term = Union[Atom, Tup, Enc]


def ident(name: str) -> Atom:
    return Atom("id", name)


def key_ref(key_id: str) -> Atom:
    return Atom("key", key_id)


def digest(term: Term, size: int = 8) -> str:
    """Short stable fingerprint of a term (deterministic across runs)."""
    return hashlib.blake2b(_canonical(term).encode(), digest_size=size).hexdigest()


def _canonical(term: Term) -> str:
    if isinstance(term, Enc):
        return f"E[{term.key_id}]({_canonical(term.body)})"
    if isinstance(term, Tup):
        return "(" + ",".join(_canonical(t) for t in term.items) + ")"
    return f"{term.kind}:{term.value!r}"


def subterms(term: Term) -> Iterator[Term]:
    """Every subterm reachable without decryption, including ``term`` itself."""
    yield term
    if isinstance(term, Tup):
        for item in term.items:
            yield from subterms(item)


@dataclass(frozen=True)
class SymKey:
    key_id: str
    owners: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Nonce:
    value: str
    issuer: str

    def atom(self) -> Atom:
        return Atom("nonce", self.value)


@dataclass(frozen=True, order=True)
class Timestamp:
    tick: int

    def atom(self) -> Atom:
        return Atom("time", self.tick)


class KeyRegistry:
    def __init__(self) -> None:
        self._keys: dict[str, SymKey] = {}

    def register(self, key: SymKey) -> SymKey:
        if key.key_id in self._keys and self._keys[key.key_id] != key:
            raise ValueError(f"key id {key.key_id!r} already registered")
        self._keys[key.key_id] = key
        return key

    def get(self, key_id: str) -> SymKey:
        try:
            return self._keys[key_id]
        except KeyError:
            raise UnknownKey(key_id) from None

    def __contains__(self, key_id: str) -> bool:
        return key_id in self._keys

    def __iter__(self) -> Iterator[SymKey]:
        return iter(self._keys.values())


def encrypt(key: SymKey, payload: Term, registry: KeyRegistry | None = None) -> Enc:
    if registry is not None and key.key_id not in registry:
        raise UnknownKey(key.key_id)
    return Enc(key.key_id, payload)


def decrypt(key: SymKey, c: Term) -> Term:
    if not isinstance(c, Enc):
        raise NotCiphertext(f"not a ciphertext: {type(c).__name__}")
    if c.key_id != key.key_id:
        raise WrongKey(f"ciphertext under {c.key_id}, not {key.key_id}")
    return c.body


class CryptoContext:
    """Key registry, nonce source and logical clock for one simulation."""

    def __init__(self, rng: random.Random | None = None, clock=None) -> None:
        self.registry = KeyRegistry()
        self._rng = rng or random.Random(0)
        self._clock = clock
        self._tick = 0
        self._issued: set[str] = set()
        self._session_keys = 0

    def now(self) -> Timestamp:
        if self._clock is not None:
            return Timestamp(self._clock())
        return Timestamp(self._tick)

    def advance(self, tick: int) -> None:
        if tick < self._tick:
            raise ValueError("logical time cannot go backwards")
        self._tick = tick

    def long_term_key(self, key_id: str, *owners: str) -> SymKey:
        return self.registry.register(SymKey(key_id, frozenset(owners)))

    def fresh_nonce(self, issuer: str) -> Nonce:
        while True:
            value = f"{issuer}#{self._rng.getrandbits(48):012x}"
            if value not in self._issued:
                self._issued.add(value)
                return Nonce(value, issuer)

    def random_bytes(self, n: int) -> bytes:
        return self._rng.getrandbits(8 * n).to_bytes(n, "big")

    def fresh_session_key(self, *owners: str) -> SymKey:
        self._session_keys += 1
        return self.registry.register(SymKey(f"Ks{self._session_keys}", frozenset(owners)))

    def encrypt(self, key: SymKey, payload: Term) -> Enc:
        return encrypt(key, payload, self.registry)

    def decrypt(self, key: SymKey, c: Term) -> Term:
        return decrypt(key, c)


class Cipher(Protocol):
    """Byte-level authenticated encryption with key-committing failure."""

    def encrypt(self, key: bytes, plaintext: bytes) -> bytes: ...

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes: ...


class ConcreteCipher:
    """AES-256-GCM with a prepended HMAC key commitment.

    The commitment makes decryption under any other key fail with
    :class:`WrongKey` before AES-GCM is even attempted.  Not used by the
    simulator; it exists so the symbolic model has a concrete counterpart.
    """

    NONCE = 12
    COMMIT = 32

    def encrypt(self, key: bytes, plaintext: bytes) -> bytes:
        from cryptography.hazmat.primitives.ciphers.aead import AESGCM

        nonce = os.urandom(self.NONCE)
        commit = hmac.new(key, b"key-commit" + nonce, hashlib.sha256).digest()
        return commit + nonce + AESGCM(key).encrypt(nonce, plaintext, commit)

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes:
        from cryptography.exceptions import InvalidTag
        from cryptography.hazmat.primitives.ciphers.aead import AESGCM

        if len(ciphertext) < self.COMMIT + self.NONCE + 16:
            raise NotCiphertext("ciphertext too short")
        commit = ciphertext[: self.COMMIT]
        nonce = ciphertext[self.COMMIT : self.COMMIT + self.NONCE]
        expected = hmac.new(key, b"key-commit" + nonce, hashlib.sha256).digest()
        if not hmac.compare_digest(commit, expected):
            raise WrongKey("key commitment mismatch")
        try:
            return AESGCM(key).decrypt(nonce, ciphertext[self.COMMIT + self.NONCE :], commit)
        except InvalidTag:
            raise WrongKey("authentication tag mismatch") from None
