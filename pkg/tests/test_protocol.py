from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiloc.adversary import Adversary, AdversaryConfig, Mode, Strategy
from multiloc.commuting import SymbolStream, TransformDomain, TransformKey, keygen
from multiloc.envelope import Atom
from multiloc.errors import ConfigError
from multiloc.messages import MODIFIED_ORDER, THREE_STAGE_ORDER, MsgType
from multiloc.network import Network
from multiloc.protocol import (
    PendingM1,
    PendingM2,
    PendingTable,
    ProtocolParams,
    Status,
    deploy_modified,
    kdc_match,
    run_modified_protocol,
    run_three_stage,
    standard_links,
)
from multiloc.scenario import parse_scenario, run_scenario
from multiloc.shares import Role, Share

P23 = TransformDomain(23)


def key23(a: int) -> TransformKey:
    return TransformKey.from_exponent(a, P23)


def stage_payloads(net: Network) -> list[tuple[int, ...]]:
    return [e.payload.value.elements for e in net.transcript]


class TestThreeStage:
    def test_worked_chain(self):
        net = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False))
        result = run_three_stage(SymbolStream((2,), P23), key23(3), key23(5), network=net)
        # oracle: plain modular exponentiation
        ts1 = pow(2, 3, 23)
        ts2 = pow(ts1, 5, 23)
        ts3 = pow(ts2, pow(3, -1, 22), 23)
        assert (ts1, ts2, ts3) == (8, 16, 9)
        assert stage_payloads(net) == [(8,), (16,), (9,)]
        assert net.transcript.msg_types() == [t.value for t in THREE_STAGE_ORDER]
        assert result.status is Status.ACCEPTED
        assert result.delivered_stream.elements == (2,) == (pow(9, pow(5, -1, 22), 23),)

    def test_identity_keys(self):
        net = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False))
        m = SymbolStream((4, 7, 19), P23)
        result = run_three_stage(m, key23(1), key23(1), network=net)
        assert stage_payloads(net) == [m.elements] * 3
        assert result.delivered_stream == m

    def test_text_message(self):
        d = TransformDomain(65537)
        rng = random.Random(3)
        result = run_three_stage("hello", keygen(d, rng), keygen(d, rng))
        assert result.status is Status.ACCEPTED and result.delivered_message == "hello"

    def test_dropped_second_stage_times_out(self):
        adv = Adversary(AdversaryConfig(Mode.MITM, links=(("BB", "AA"),), strategy=Strategy.SUPPRESS))
        net = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False), adversary=adv)
        result = run_three_stage(SymbolStream((2,), P23), key23(3), key23(5), network=net)
        assert result.status is Status.TIMEOUT and result.delivered is None

    def test_basic_row_forbids_b_apply_at_b(self):
        from multiloc.protocol import deploy_three_stage

        net = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False))
        dep = deploy_three_stage(net, key23(3), key23(5), "basic")
        with pytest.raises(ConfigError):
            dep.parties["B"].transform("b", "apply", SymbolStream((2,), P23))
        with pytest.raises(ConfigError):
            dep.parties["AA"].transform("b", "invert", SymbolStream((2,), P23))
        multi = deploy_three_stage(Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False)), key23(3), key23(5), "multilocated")
        assert multi.parties["B"].transform("b", "apply", SymbolStream((2,), P23)).elements == (9,)

    def test_not_resistant_to_substitution(self):
        # finding: with no authentication, a rewritten stage is accepted as-is
        adv = Adversary(AdversaryConfig(Mode.MITM, links=(("A", "BB"),), strategy=Strategy.SUBSTITUTE))
        net = Network(standard_links({"A": "AA", "B": "BB"}, with_kdc=False), adversary=adv)
        result = run_three_stage(SymbolStream((2,), P23), key23(3), key23(5), network=net)
        assert result.status is Status.ACCEPTED and result.delivered_stream.elements != (2,)


class TestModifiedHappyPath:
    def test_hello(self):
        net = Network(standard_links({"A": "AA", "B": "BB"}))
        result = run_modified_protocol("hello", network=net)
        assert result.status is Status.ACCEPTED and result.delivered_message == "hello"
        assert net.transcript.msg_types() == [t.value for t in MODIFIED_ORDER]
        secure = [e.secure for e in net.transcript]
        assert secure == [False, True, False, False, True, False, False]

    @settings(max_examples=40, deadline=None)
    @given(st.text(alphabet=st.characters(max_codepoint=127), max_size=64), st.integers(1, 7))
    def test_delivery_correctness(self, text, k):
        result = run_modified_protocol(text, ProtocolParams(chunk_width=k))
        assert result.status is Status.ACCEPTED and result.delivered_message == text

    def test_halves_policy(self):
        from multiloc.shares import SplitPolicy

        result = run_modified_protocol("halves", ProtocolParams(policy=SplitPolicy.HALVES))
        assert result.delivered_message == "halves"

    def test_unsealed_still_delivers(self):
        assert run_modified_protocol("x", ProtocolParams(seal_shares=False)).delivered_message == "x"


def scenario(text: str):
    return run_scenario(parse_scenario("seed = 1\n" + text))


class TestFreshness:
    def test_stale_at_kdc(self):
        # BB's clock lags by delta; one tick of latency puts T_b at now - delta - 1 on arrival
        out = scenario("skew = BB -10\n")
        final = out.final()["s1"]
        assert final.status is Status.REJECTED_STALE and final.party == "KDC"

    def test_kdc_boundary_is_fresh(self):
        # exactly delta old on arrival: the KDC still issues a key (AA, later, does not)
        out = scenario("skew = BB -9\n")
        assert len(out.deployment.parties["KDC"].issued) == 1
        assert out.final()["s1"].party == "AA"

    def test_small_skew_accepted(self):
        out = scenario("skew = BB -5\n")
        assert out.final()["s1"].status is Status.ACCEPTED

    def test_stale_at_b(self):
        # the reply reaches B long after T_b was minted
        out = scenario("link = AA->B 12\nlink = KDC->AA 1\n")
        final = out.final()["s1"]
        assert final.status is Status.REJECTED_STALE and final.party == "B"

    def test_slow_link_within_window(self):
        out = scenario("link = AA->B 5\n")
        assert out.final()["s1"].status is Status.ACCEPTED


class TestKdcMatching:
    def test_pairs_pending_m1(self):
        table = PendingTable(10)
        m1 = PendingM1("A", "B", Atom("nonce", "a"), 0, "s1")
        assert kdc_match(table, 0, m1=m1) is None
        share = Share(Role.EVEN, (2,), 3, "t")
        m2 = PendingM2("B", Atom("nonce", "b"), 0, share, 1, "s1")
        assert kdc_match(table, 1, m2=m2) == (m1, m2)

    def test_m2_first(self):
        table = PendingTable(10)
        share = Share(Role.EVEN, (2,), 3, "t")
        m2 = PendingM2("B", Atom("nonce", "b"), 0, share, 0, "s1")
        assert kdc_match(table, 0, m2=m2) is None
        m1 = PendingM1("A", "B", Atom("nonce", "a"), 1, "s1")
        assert kdc_match(table, 1, m1=m1) == (m1, m2)

    def test_expiry(self):
        table = PendingTable(10)
        kdc_match(table, 0, m1=PendingM1("A", "B", Atom("nonce", "a"), 0, "s1"))
        share = Share(Role.EVEN, (2,), 3, "t")
        assert kdc_match(table, 11, m2=PendingM2("B", Atom("nonce", "b"), 11, share, 11, "s1")) is None

    def test_exactly_one(self):
        with pytest.raises(ValueError):
            kdc_match(PendingTable(1), 0)

    def test_reordered_run(self):
        # M1 is slow, so the KDC holds M2 until M1 arrives
        out = scenario("link = A->KDC 4\n")
        assert out.final()["s1"].status is Status.ACCEPTED
        reply = out.transcript.on_link("KDC", "AA")[0]
        assert reply.tick == 4 and len(out.transcript) == 7

    def test_two_initiators_one_responder(self):
        out = scenario("principal = A2 AA2\nsession = A B first @0\nsession = A2 B second @0\n")
        finals = out.final()
        assert finals["s1"].delivered_message == "first"
        assert finals["s2"].delivered_message == "second"
        kdc = out.deployment.parties["KDC"]
        assert len({k.key_id for k in kdc.issued}) == 2


    def test_same_instant_race_mispairs_but_never_misdelivers(self):
        # the second initiator's share reaches BB first, so the KDC pairs it with A's request
        out = scenario("principal = A2 AA2\nsession = A B first @0\nsession = A2 B second @0\nlink = A->BB 3\n")
        finals = out.final()
        assert {r.status for r in finals.values()} == {Status.REJECTED_INTEGRITY}
        assert not any(r.status is Status.ACCEPTED for r in out.results)


class TestProvisioning:
    def test_missing_key_is_config_error(self):
        with pytest.raises(ConfigError):
            parse_scenario("seed = 1\nprovision = AA\n")

    def test_principal_needs_grammar(self):
        with pytest.raises(ConfigError):
            parse_scenario("seed = 1\nprovision = B K_B\n")

    def test_deploy_requires_principal_key(self):
        net = Network(standard_links({"A": "AA", "B": "BB"}))
        dep = deploy_modified(net, ProtocolParams(), {"A": "AA", "B": "BB"}, {"A"})
        assert dep.held_keys()["AA"] == {"K_A"}
        assert dep.held_keys()["KDC"] == {"K_A", "K_B"}
        assert dep.held_keys()["BB"] == {"K_B"}


class TestOutcomes:
    def test_session_key_learned_only_by_ends(self):
        out = scenario("")
        held = out.deployment.held_keys()
        ks = {k for k in held["B"] if k.startswith("Ks")}
        assert ks and ks <= held["AA"]
        assert not ks & held["BB"] and not ks & held["A"]

    def test_replayed_share_rejected_by_agent(self):
        out = scenario("adversary = replay SHARE_TO_BB 1\n")
        statuses = [r.status for r in out.results]
        assert Status.ACCEPTED in statuses and Status.REJECTED_REPLAY in statuses
        assert out.final()["s1"].status is Status.ACCEPTED

    def test_replayed_kdc_reply(self):
        out = scenario("adversary = replay KDC_TO_AA 1\n")
        assert [r.status for r in out.results].count(Status.ACCEPTED) == 1

    def test_replayed_request(self):
        out = scenario("adversary = replay A_TO_KDC 1\n")
        assert [r.status for r in out.results].count(Status.ACCEPTED) == 1

    def test_unexpected_type_rejected(self):
        out = scenario("")
        from multiloc.messages import ProtocolMessage

        net_msg = ProtocolMessage(MsgType.TS1, Atom("data", 1), "A", "B", "s1")
        party = out.deployment.parties["B"]
        before = len(out.deployment.log.results)
        party.on_message(net_msg, out.deployment.net)
        assert out.deployment.log.results[before].status is Status.REJECTED_INTEGRITY
