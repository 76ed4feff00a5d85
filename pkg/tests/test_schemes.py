"""Single-outstanding-packet automata, trace identities and the compiled fast path."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_arq import BlepModel, FeedbackChannelParams, SchemeConfig, run_scheme
from feedback_arq.montecarlo import simulate_block
from feedback_arq.schemes import ConfigError, SchemeKind, effective_channel


def outcomes(kind, M=4, L=1, eps=0.1, g=1.0, p0=0.0, p1=0.0, n=200, seed=0, **kw):
    cfg = SchemeConfig(kind, M=M, L=L, **kw)
    return list(run_scheme(cfg, BlepModel(eps, g, M), FeedbackChannelParams(p0, p1), n, np.random.default_rng(seed)))


def trace(outs):
    return [
        (o.packet_id, o.delivered_declared, o.decoded_truth, o.tx_attempts, o.feedback_occasions, o.delay_rtts, o.latency_k)
        for o in outs
    ]


# --- config -----------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="regsaw", M=0),
        dict(kind="regsaw", M=4, L=2),
        dict(kind="blind", M=4, L=3),
        dict(kind="retxlack", M=2, L=3),
        dict(kind="lack", M=4, q0_cap=1e-4),
        dict(kind="asym", M=4, q0_cap=1e-4, alpha=0.5),
        dict(kind="asym", M=4, alpha=-1.0),
        dict(kind="nope", M=4),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        SchemeConfig(**kwargs)


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)


def test_labels():
    assert SchemeConfig("lack", M=4, L=2).label == "lack-L2"
    assert SchemeConfig("regsaw", M=4).label == "regsaw"
    assert SchemeConfig("asym", M=4, q0_cap=1e-4).label == "asym-q0cap0.0001"


def test_blep_must_cover_M():
    with pytest.raises(ConfigError):
        next(run_scheme(SchemeConfig("regsaw", M=5), BlepModel(0.1, 1, 4), FeedbackChannelParams(0, 0), 1, np.random.default_rng()))


def test_effective_channel_asym():
    ch = FeedbackChannelParams(0.01, 0.01)
    assert effective_channel(SchemeConfig("asym", M=4, q0_cap=0.1), ch) == ch
    assert effective_channel(SchemeConfig("asym", M=4, alpha=0.0), ch) == ch
    capped = effective_channel(SchemeConfig("asym", M=4, q0_cap=1e-4), ch)
    assert capped.p0 == pytest.approx(1e-4, rel=1e-10) and capped.p1 > 0.01
    with pytest.raises(ConfigError):
        effective_channel(SchemeConfig("asym", M=4, q0_cap=1e-4), FeedbackChannelParams(0.01, 0.02))
    assert effective_channel(SchemeConfig("lack", M=4, L=2), ch) is ch


# --- per-scheme semantics ---------------------------------------------------


def test_blind_always_uses_M():
    for o in outcomes("blind", M=4, p0=0.3, p1=0.3):
        assert o.tx_attempts == 4 and o.feedback_occasions == 0 and o.delay_rtts == 4 and o.delivered_declared


def test_regsaw_perfect_link():
    for o in outcomes("regsaw", eps=0.0):
        assert o.tx_attempts == 1 and o.decoded_truth and o.latency_k == 0 and o.decode_latency == 1.0


def test_lack_perfect_link_needs_L_reports():
    for o in outcomes("lack", L=2, eps=0.0):
        assert o.decoded_truth and o.tx_attempts == 1 and o.feedback_occasions == 2 and o.delay_rtts == 2


def test_lrep_perfect_link():
    for o in outcomes("lrep", L=3, eps=0.0):
        assert o.tx_attempts == 1 and o.delay_rtts == 3


def test_retxlack_perfect_feedback_sends_L_copies():
    # with truthful feedback every attempt after decoding still needs its own ACK
    for o in outcomes("retxlack", M=4, L=3, eps=0.0):
        assert o.tx_attempts == 3 and o.delivered_declared


def test_regsaw_all_false_acks_single_attempt():
    for o in outcomes("regsaw", eps=1.0, p0=1.0):
        assert o.tx_attempts == 1 and o.delivered_declared and not o.decoded_truth


def test_regsaw_exhaustion():
    for o in outcomes("regsaw", eps=1.0):
        assert o.tx_attempts == 4 and not o.delivered_declared and o.latency_k is None


def test_lack_failed_packet_still_listens():
    # decode always fails, every report reads NACK: ends at M attempts
    for o in outcomes("lack", L=2, eps=1.0):
        assert o.tx_attempts == 4 and o.delay_rtts == 4 and not o.delivered_declared


@pytest.mark.parametrize("kind, L", [("regsaw", 1), ("lrep", 2), ("lack", 2), ("retxlack", 2), ("blind", 1), ("bcf", 2)])
def test_latency_bounded_by_delay(kind, L):
    for o in outcomes(kind, L=L, eps=0.5, g=1.2, p0=0.1, p1=0.1, n=500):
        assert 1 <= o.tx_attempts <= 4
        if o.decoded_truth:
            assert o.latency_k >= 0
            if kind != "bcf":
                # bcf interleaves packets, so wall-clock latency is not tied to its own RTT count
                assert o.latency_k < max(o.delay_rtts, 1) * L
        else:
            assert o.latency_k is None and o.decode_latency is None


def test_packet_ids_in_order():
    for kind, L in [("regsaw", 1), ("bcf", 3)]:
        outs = outcomes(kind, L=L, eps=0.3, p0=0.1, p1=0.1, n=300)
        assert [o.packet_id for o in outs] == list(range(300))


# --- trace identities ---------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    eps=st.floats(0.0, 0.9),
    g=st.floats(1.0, 2.0),
    p=st.floats(0.0, 0.4),
    M=st.integers(1, 5),
)
def test_l1_variants_trace_identical_to_regsaw(seed, eps, g, p, M):
    ref = trace(outcomes("regsaw", M=M, eps=eps, g=g, p0=p, p1=p, n=60, seed=seed))
    for kind, kw in [("lrep", {}), ("lack", {}), ("retxlack", {}), ("bcf", {}), ("bcf", {"retx_policy": "posterior"}),
                     ("asym", {"alpha": 0.0}), ("asym", {"q0_cap": 0.5})]:
        got = trace(outcomes(kind, M=M, eps=eps, g=g, p0=p, p1=p, n=60, seed=seed, **kw))
        assert got == ref, (kind, kw)


# --- compiled kernels vs reference automata -----------------------------------


def kernel_trace(kind, M, L, eps, g, p0, p1, n, seed, **kw):
    cfg = SchemeConfig(kind, M=M, L=L, **kw)
    blep = BlepModel(eps, g, M)
    ch = effective_channel(cfg, FeedbackChannelParams(p0, p1))
    a = simulate_block(cfg, blep, ch, n, np.random.default_rng(seed))
    return [
        (i, bool(a["declared"][i]), bool(a["decoded"][i]), int(a["n_tx"][i]), int(a["n_fb"][i]), int(a["delay"][i]),
         None if a["latency"][i] < 0 else int(a["latency"][i]))
        for i in range(n)
    ]


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["regsaw", "lrep", "lack", "retxlack", "blind", "bcf", "bcf-post"]),
    L=st.integers(1, 4),
    M=st.integers(1, 5),
    eps=st.floats(0.0, 0.95),
    g=st.floats(1.0, 2.0),
    p0=st.floats(0.0, 0.5),
    p1=st.floats(0.0, 0.5),
    seed=st.integers(0, 2**32 - 1),
)
def test_kernel_matches_reference(kind, L, M, eps, g, p0, p1, seed):
    kw = {}
    if kind == "bcf-post":
        kind, kw = "bcf", {"retx_policy": "posterior"}
    if kind in ("regsaw", "blind"):
        L = 1
    if kind == "retxlack":
        L = min(L, M)
    n = 150
    ref = outcomes(kind, M=M, L=L, eps=eps, g=g, p0=p0, p1=p1, n=n, seed=seed, **kw)
    assert kernel_trace(kind, M, L, eps, g, p0, p1, n, seed, **kw) == trace(ref)


def test_kernel_matches_reference_asym():
    ref = outcomes("asym", eps=0.3, p0=0.05, p1=0.05, n=400, seed=3, q0_cap=1e-3)
    assert kernel_trace("asym", 4, 1, 0.3, 1.0, 0.05, 0.05, 400, 3, q0_cap=1e-3) == trace(ref)
