"""Backwards composite feedback: transmitter/receiver automata and retransmission order."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_arq import BlepModel, FeedbackChannelParams, SchemeConfig, run_scheme
from feedback_arq.schemes import (
    BcfRxState,
    BcfTxState,
    RetxPolicy,
    bcf_rx_step,
    bcf_tx_step,
    composite_feedback,
    posterior_failure_probability,
    recency_order,
    retx_lookup,
)
from feedback_arq.schemes.bcf import POSTERIOR_NAK_CAP, posterior_scorer, posterior_table

CFG2 = SchemeConfig("bcf", M=4, L=2)


@pytest.mark.parametrize("flags, expected", [([1, 1, 1], 1), ([1, 0], 0), ([0], 0), ([], 1)])
def test_composite_feedback(flags, expected):
    assert composite_feedback(flags) == expected


def test_recency_order():
    assert recency_order(1, 3) == [1, 0, 2]
    assert recency_order(0, 1) == [0]


# --- transmitter ---------------------------------------------------------------


def test_ack_run_evicts_delivered_packet():
    s = BcfTxState.initial(2)
    s, a = bcf_tx_step(s, 1, CFG2)
    assert (a.kind, a.slot, a.packet_id, a.evicted) == ("new", 0, 0, None)
    s, a = bcf_tx_step(s, 1, CFG2)
    assert (a.kind, a.slot, a.packet_id) == ("new", 1, 1)
    assert s.ack_counter == [1, 0]
    s, a = bcf_tx_step(s, 1, CFG2)
    # slot 0 now holds two ACKs and is recycled for packet 2
    assert (a.slot, a.packet_id) == (0, 2)
    assert a.evicted.packet_id == 0 and a.evicted.ack_count == 2 and a.evicted.delivered


def test_ndi_toggles_only_for_new_packets():
    s = BcfTxState.initial(2)
    s, a1 = bcf_tx_step(s, 1, CFG2)
    s, a2 = bcf_tx_step(s, 0, CFG2)
    s, a3 = bcf_tx_step(s, 1, CFG2)
    assert a2.kind == "retx" and a2.ndi == a1.ndi
    assert a3.kind == "new" and a3.ndi != a2.ndi


def test_exhausted_slots_take_new_packet_path():
    s = BcfTxState([7, 8], [4, 4], [0, 1], [3, 3], 1, ndi_bit=1, next_packet_id=9)
    s2, a = bcf_tx_step(s, 0, CFG2)
    assert a.kind == "new" and a.ndi == 0 and a.slot == 0
    assert a.evicted.packet_id == 7 and not a.evicted.delivered
    assert s2.nak_counter == [0, 3]  # the fresh slot is reset, the other is untouched


def test_tx_step_does_not_mutate_input():
    s = BcfTxState.initial(2)
    before = (list(s.packets), list(s.tx_counter), s.ndi_toggle_idx)
    bcf_tx_step(s, 1, CFG2)
    assert (s.packets, s.tx_counter, s.ndi_toggle_idx) == before


def test_single_slot_acts_like_regsaw_transmitter():
    cfg = SchemeConfig("bcf", M=3, L=1)
    s = BcfTxState.initial(1)
    kinds = []
    for obs in [1, 0, 0, 0, 1, 0, 1]:
        s, a = bcf_tx_step(s, obs, cfg)
        kinds.append(a.kind)
    # NACK, NACK, then exhausted at M = 3 so the third NACK brings a new packet
    assert kinds == ["new", "retx", "retx", "new", "new", "retx", "new"]


# --- retransmission order ------------------------------------------------------


def test_newest_first_lookup():
    order = recency_order(1, 2)
    assert retx_lookup([1, 1], [0, 0], [1, 1], order, RetxPolicy.NEWEST_FIRST, M=4, L=2) == 1
    assert retx_lookup([2, 4], [0, 0], [1, 1], order, RetxPolicy.NEWEST_FIRST, M=4, L=2) == 0
    assert retx_lookup([4, 4], [0, 0], [1, 1], order, RetxPolicy.NEWEST_FIRST, M=4, L=2) is None


def test_lookup_skips_slots_with_L_acks():
    order = recency_order(1, 2)
    assert retx_lookup([1, 1], [0, 2], [1, 1], order, RetxPolicy.NEWEST_FIRST, M=4, L=2) == 0


def test_posterior_zero_eps():
    assert posterior_failure_probability((2, 1, 3), 0.0, 0.01, 0.01) == 0.0


def test_posterior_truthful_nack():
    assert posterior_failure_probability((1, 0, 1), 0.1, 0.0, 0.0) == 1.0


def test_posterior_inconsistent_history():
    with pytest.raises(ValueError):
        posterior_failure_probability((2, 0, 1), 0.1, 0.01, 0.01)
    with pytest.raises(ValueError):
        posterior_failure_probability((0, 0, 1), 0.1, 0.01, 0.01)


def test_composite_nack_walkthrough():
    # L = 2: packet 2 went out and was ACKed, packet 3 went out, then a composite NACK.
    eps, p = 0.1, 0.001
    p2 = posterior_failure_probability((1, 1, 1), eps, p, p)
    p3 = posterior_failure_probability((1, 0, 1), eps, p, p)
    assert p2 == pytest.approx(0.1, rel=1e-2)
    assert p3 == pytest.approx(0.991, rel=1e-3)
    score = posterior_scorer(eps, p, p, 1.0)
    order = recency_order(1, 2)  # packet 3 sits in slot 1, packet 2 in slot 0
    assert retx_lookup([1, 1], [1, 0], [1, 1], order, RetxPolicy.POSTERIOR_LIKELIHOOD, M=4, L=2, score=score) == 1
    # packet 3 retransmitted, another composite NACK: packet 2 becomes the likelier culprit
    q2 = posterior_failure_probability((1, 1, 2), eps, p, p)
    q3 = posterior_failure_probability((2, 0, 2), eps, p, p)
    assert q2 > q3
    assert retx_lookup([1, 2], [1, 0], [2, 2], order, RetxPolicy.POSTERIOR_LIKELIHOOD, M=4, L=2, score=score) == 0


def test_posterior_needs_scorer():
    with pytest.raises(ValueError):
        retx_lookup([1], [0], [1], [0], RetxPolicy.POSTERIOR_LIKELIHOOD, M=4, L=1)


def test_posterior_table_matches_direct():
    t = posterior_table(4, 2, 0.1, 0.01, 0.02, 1.2)
    assert t.shape == (5, 3, POSTERIOR_NAK_CAP + 1)
    assert t[2, 1, 3] == pytest.approx(posterior_failure_probability((2, 1, 3), 0.1, 0.01, 0.02, 1.2))
    assert t[2, 0, 1] == -1.0  # fewer NACKs than transmissions


@settings(max_examples=150, deadline=None)
@given(
    tx=st.integers(1, 4),
    ack=st.integers(0, 3),
    extra=st.integers(0, 5),
    eps=st.floats(1e-4, 0.9),
    p0=st.floats(1e-4, 0.3),
    p1=st.floats(1e-4, 0.3),
)
def test_posterior_is_probability(tx, ack, extra, eps, p0, p1):
    v = posterior_failure_probability((tx, ack, tx + extra), eps, p0, p1)
    assert 0.0 <= v <= 1.0


@settings(max_examples=100, deadline=None)
@given(tx=st.integers(1, 3), ack=st.integers(0, 2), nak_extra=st.integers(0, 3), eps=st.floats(0.01, 0.5))
def test_more_acks_lower_failure_posterior(tx, ack, nak_extra, eps):
    p = 0.01
    nak = tx + nak_extra
    a = posterior_failure_probability((tx, ack, nak), eps, p, p)
    b = posterior_failure_probability((tx, ack + 1, nak), eps, p, p)
    assert b <= a + 1e-12


# --- receiver ------------------------------------------------------------------


def test_receiver_new_packet_composite():
    rx = BcfRxState.initial(2)
    blep = BlepModel(0.0, 1.0, 4)
    rx, fb, ev = bcf_rx_step(rx, 1, blep, np.random.default_rng(0), CFG2)
    assert ev.new_packet and ev.newly_decoded and ev.slot == 0 and fb == 1


def test_receiver_retransmission_can_turn_composite_to_ack():
    # slot 0 decoded, slot 1 failed once; its retransmission decodes
    rx = BcfRxState([1, 1], [1, 0], [0, 0], [1, 0], 1, last_ndi=0)
    rx, fb, ev = bcf_rx_step(rx, 0, BlepModel(0.0, 1.0, 4), np.random.default_rng(0), CFG2)
    assert ev.slot == 1 and not ev.new_packet and ev.newly_decoded and fb == 1


def test_decoded_slot_is_not_resampled():
    cfg = SchemeConfig("bcf", M=4, L=1)
    rx = BcfRxState([1], [0], [0], [1], 0, last_ndi=1)
    rng = np.random.default_rng(3)
    state = rng.bit_generator.state
    rx, fb, ev = bcf_rx_step(rx, 1, BlepModel(0.9, 1.0, 4), rng, cfg)
    assert rx.decode_flags == [1] and fb == 1 and not ev.newly_decoded
    assert rng.bit_generator.state == state


# --- whole-system properties -------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    L=st.integers(1, 4),
    M=st.integers(1, 5),
    eps=st.floats(0.0, 0.9),
    p0=st.floats(0.0, 0.4),
    p1=st.floats(0.0, 0.4),
    policy=st.sampled_from(["newest", "posterior"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_receiver_stays_in_sync(L, M, eps, p0, p1, policy, seed):
    cfg = SchemeConfig("bcf", M=M, L=L, retx_policy=policy)
    outs = list(run_scheme(cfg, BlepModel(eps, 1.1, M), FeedbackChannelParams(p0, p1), 150, np.random.default_rng(seed), sync_check=True))
    assert len(outs) == 150
    for o in outs:
        assert 1 <= o.tx_attempts <= M
        # a packet is declared delivered only after L ACKs, which truthful feedback never gives a failure
        if p0 == 0.0 and o.delivered_declared:
            assert o.decoded_truth


def test_eviction_invariant():
    cfg = SchemeConfig("bcf", M=3, L=3)
    rng = np.random.default_rng(11)
    tx = BcfTxState.initial(3)
    for _ in range(5000):
        tx, a = bcf_tx_step(tx, int(rng.random() < 0.7), cfg)
        if a.evicted is not None:
            ev = a.evicted
            assert ev.ack_count >= 3 or ev.tx_attempts == 3


@pytest.mark.parametrize("L", [2, 3, 4])
def test_perfect_feedback_no_false_delivery(L):
    cfg = SchemeConfig("bcf", M=3, L=L)
    outs = list(run_scheme(cfg, BlepModel(0.5, 1.0, 3), FeedbackChannelParams(0.0, 0.0), 5000, np.random.default_rng(1)))
    assert not any(o.delivered_declared and not o.decoded_truth for o in outs)
    # the converse does not hold: a decoded packet can be retransmitted to exhaustion
    # while an older slot is the one failing, and then leaves without L ACKs
    assert any(o.decoded_truth and not o.delivered_declared for o in outs)
