"""Cross-module invariants checked over randomized runs."""

from __future__ import annotations

import dataclasses
import random
from collections import Counter

from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from multiloc.adversary import AdversaryConfig, Mode, Strategy
from multiloc.commuting import SymbolStream, TransformDomain, apply, invert, keygen
from multiloc.envelope import Atom, Enc, SymKey, Tup, decrypt, encrypt, subterms
from multiloc.errors import NonZeroPadding, WrongKey
from multiloc.grammar import chunk_grammar, decode, encode, encode_text
from multiloc.knowledge import closure
from multiloc.messages import MsgType
from multiloc.protocol import Status, long_term_key_id
from multiloc.scenario import parse_scenario, run_scenario
from multiloc.shares import split
from multiloc.verdict import Claim

# protocol links first, then links the happy path never uses
INSECURE = [
    ("A", "BB"), ("A", "KDC"), ("BB", "KDC"), ("KDC", "AA"), ("AA", "B"),
    ("A", "B"), ("AA", "BB"), ("B", "AA"), ("KDC", "B"), ("BB", "AA"),
]  # fmt: skip
text7 = st.text(alphabet=st.characters(max_codepoint=127), max_size=24)


@settings(max_examples=200)
@given(st.integers(1, 7), st.lists(st.integers(0, 127), max_size=12))
def test_padding_rule(k, values):
    g = chunk_grammar(k)
    chunks = [v % (2**k) for v in values]
    bits = "".join(format(c, f"0{k}b") for c in chunks)
    seq = encode(bits, g)
    pad = len(bits) % 7
    if pad == 0 or set(bits[-pad:]) == {"0"}:
        assert decode(seq, g) == "".join(chr(int(bits[i : i + 7], 2)) for i in range(0, len(bits) - pad, 7))
    else:
        try:
            decode(seq, g)
        except NonZeroPadding:
            pass
        else:
            raise AssertionError("nonzero pad bits accepted")


@given(st.lists(st.integers(1, 20), max_size=300))
def test_shares_partition_the_sequence(tokens):
    odd, even = split(tokens, "t")
    assert abs(len(odd.tokens) - len(even.tokens)) <= 1
    assert Counter(odd.tokens) + Counter(even.tokens) == Counter(tokens)


@given(st.integers(1, 65536), st.integers(0, 2**32))
def test_transforms_stay_in_range(x, seed):
    d = TransformDomain(65537)
    rng = random.Random(seed)
    a, b = keygen(d, rng), keygen(d, rng)
    s = SymbolStream((x,), d)
    for out in (apply(a, s), invert(a, s), apply(b, apply(a, s))):
        assert all(1 <= v < 65537 for v in out.elements)
    assert invert(b, invert(a, apply(b, apply(a, s)))) == s


small_terms = st.recursive(
    st.builds(Atom, st.just("data"), st.integers()),
    lambda inner: st.lists(inner, max_size=3).map(lambda xs: Tup(*xs)),
)
key_ids = st.sampled_from(["K_A", "K_B", "Ks1", "K_E"])


@given(small_terms, key_ids, key_ids)
def test_wrong_key_always_fails(term, kid, other):
    assume(kid != other)
    try:
        decrypt(SymKey(other), encrypt(SymKey(kid), term))
    except WrongKey:
        return
    raise AssertionError("decrypted under the wrong key")


def test_closure_is_exactly_the_listed_rules():
    inner = Atom("data", 1)
    c = Enc("K_A", inner)
    know = closure([Tup(c, Atom("key", "K_B"))])
    assert know.terms == {Tup(c, Atom("key", "K_B")), c, Atom("key", "K_B")}
    # a key learned from a tuple opens a ciphertext in another observation
    know = closure([Tup(Atom("key", "K_A")), c])
    assert inner in know


adversaries = st.one_of(
    st.builds(
        lambda link, strat, seed: AdversaryConfig(Mode.MITM, links=(link,), strategy=strat, seed=seed),
        st.sampled_from(INSECURE), st.sampled_from(list(Strategy)), st.integers(0, 99),
    ),
    st.builds(
        lambda t, d, seed: AdversaryConfig(Mode.REPLAY, msg_type=t, delay=d, seed=seed),
        st.sampled_from([m for m in MsgType if m.value not in ("TS1", "TS2", "TS3", "AGENT_BRIEF", "BB_BRIEF_B")]),
        st.integers(0, 30), st.integers(0, 99),
    ),
    st.builds(
        lambda target, rate, seed: AdversaryConfig(Mode.DOS, target=target, drop_rate=rate, seed=seed),
        st.sampled_from(["KDC", "B", "AA", "BB"]), st.floats(0, 1), st.integers(0, 99),
    ),
    st.builds(lambda seed: AdversaryConfig(Mode.EAVESDROP, seed=seed), st.integers(0, 99)),
)


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(adversaries, text7, st.integers(1, 4), st.integers(0, 3), st.integers(-12, 12), st.integers(0, 50))
def test_safety_under_random_attacks(adv, message, k, latency, skew, seed):
    cfg = parse_scenario(f"seed = {seed}\nchunk_width = {k}\nskew = B {skew}\nlink = KDC->AA {latency}\n")
    cfg = dataclasses.replace(cfg, message=message, adversary=adv)
    out = run_scenario(cfg)

    # no wrong accept, at most one accept
    accepts = [r for r in out.results if r.status is Status.ACCEPTED]
    assert all(r.delivered_message == message for r in accepts)
    assert len(accepts) <= 1
    assert all(v.passed for v in out.verdicts([Claim.MIM_RESIST, Claim.DOS_SAFETY]))

    # adversary confinement
    assert all(e.adv == "none" for e in out.transcript if e.secure)

    # monotone clock
    ticks = [e.tick for e in out.transcript]
    assert ticks == sorted(ticks)

    # key confinement: long-term rows plus session keys the KDC issued to that pair
    issued = {k.key_id: k.owners for k in out.deployment.parties["KDC"].issued}
    for name, held in out.deployment.held_keys().items():
        row = cfg.provision_table()[name].keys
        for kid in held - row:
            assert kid in issued and name in issued[kid]

    # freshness of every accept, measured on B's clock
    for r in accepts:
        brief = out.transcript.on_link("BB", "B")[0].payload
        t_b = brief.items[1].value
        assert abs(r.tick + skew - t_b) <= cfg.delta


def test_nonces_are_unique_over_a_busy_run():
    sessions = "".join(f"session = A B m{i} @{i}\n" for i in range(12))
    out = run_scenario(parse_scenario("seed = 4\n" + sessions))
    keys = {long_term_key_id(p) for p in "AB"} | {k.key_id for k in out.deployment.parties["KDC"].issued}
    know = closure([e.payload for e in out.transcript], keys)
    nonces = [t.value for t in know.terms if isinstance(t, Atom) and t.kind == "nonce"]
    assert len(nonces) == len(set(nonces)) == 24
    assert all(r.status is Status.ACCEPTED for r in out.final().values())


def test_each_single_link_keeps_the_secret():
    for link in INSECURE:
        cfg = parse_scenario(f"seed = 2\nadversary = eavesdrop {link[0]}->{link[1]}\nadversary_knows = grammar\n")
        out = run_scenario(cfg)
        know = closure(out.adversary.observed_terms(), (), True, 3)
        assert not know.knows_text("hello"), link
        assert not know.knows_sequence(encode_text("hello", chunk_grammar(3))), link
        # nothing readable beyond what was sent in the clear
        opened = [t for t in know.terms if isinstance(t, Atom) and t.kind in ("seq", "text")]
        assert opened == []


def test_every_insecure_payload_is_share_or_ciphertext():
    out = run_scenario(parse_scenario("seed = 3\n"))
    for e in out.transcript:
        if e.secure:
            continue
        leaves = [t for t in subterms(e.payload) if isinstance(t, Atom)]
        assert all(t.kind == "share" for t in leaves), e.line()
