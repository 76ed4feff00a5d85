"""Single-bit feedback channel: binary asymmetric channel and BPSK threshold tuning."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special


@dataclass(frozen=True)
class FeedbackChannelParams:
    """Binary asymmetric channel.

    p0 is the false-ACK rate P(observe 1 | sent 0) and p1 the false-NACK rate
    P(observe 0 | sent 1).
    """

    p0: float
    p1: float

    def __post_init__(self):
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def symmetric(cls, p: float) -> "FeedbackChannelParams":
        return cls(p, p)

    def flip_probability(self, sent: int) -> float:
        return self.p1 if sent else self.p0


@dataclass(frozen=True)
class AsymDetectionParams:
    """BPSK feedback detection with the decision threshold shifted by ``alpha * sqrt(Eb)``.

    ``beyond_constellation`` is set when ``alpha >= 1``, i.e. the threshold sits at or
    past the ACK constellation point; the error formulas remain valid there but the
    false-NACK rate exceeds one half.
    """

    ebn0: float
    alpha: float
    q0: float
    q1: float

    @property
    def beyond_constellation(self) -> bool:
        return self.alpha >= 1.0

    def channel(self) -> FeedbackChannelParams:
        return FeedbackChannelParams(self.q0, self.q1)


def bep_bpsk(ebn0: float) -> float:
    """Bit error probability of coherent BPSK with a symmetric threshold (linear Eb/N0)."""
    if ebn0 < 0:
        raise ValueError(f"Eb/N0 must be non-negative, got {ebn0}")
    return 0.5 * special.erfc(math.sqrt(ebn0))


def shifted_error_rates(ebn0: float, alpha: float) -> tuple[float, float]:
    """(q0, q1) for threshold offset ``alpha``."""
    s = math.sqrt(ebn0)
    return 0.5 * special.erfc((1.0 + alpha) * s), 0.5 * special.erfc((1.0 - alpha) * s)


def _log_tail(x: float) -> float:
    # log(erfc(x) / 2), finite far into the tail
    return float(special.log_ndtr(-math.sqrt(2.0) * x))


def _polish(f, x0: float, lo: float, hi: float) -> float:
    """Bracketed root refinement around an erfcinv starting point."""
    for width in (1e-8, 1e-4, None):
        if width is None:
            a, b = lo, hi
        else:
            a, b = max(lo, x0 - width * (1 + abs(x0))), min(hi, x0 + width * (1 + abs(x0)))
        fa, fb = f(a), f(b)
        if fa == 0.0:
            return a
        if fb == 0.0:
            return b
        if fa * fb < 0:
            return optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return x0


def ebn0_for_bep(p: float) -> float:
    """Invert :func:`bep_bpsk` for ``0 < p < 0.5``."""
    if not 0.0 < p < 0.5:
        raise ValueError(f"target error rate must lie in (0, 0.5), got {p}")
    s0 = float(special.erfcinv(2.0 * p))
    lp = math.log(p)
    s = _polish(lambda s: _log_tail(s) - lp, s0, 0.0, 40.0)
    return s * s


def alpha_for_q0(ebn0: float, q0: float) -> float:
    """Threshold offset giving false-ACK rate ``q0`` at the given Eb/N0."""
    s = math.sqrt(ebn0)
    target = float(special.erfcinv(2.0 * q0))
    lq = math.log(q0)
    a0 = target / s - 1.0
    if a0 <= 0.0:
        return 0.0
    return _polish(lambda a: _log_tail((1.0 + a) * s) - lq, a0, 0.0, 40.0 / s)


def solve_asym_params(p_target: float, q0_target: float) -> AsymDetectionParams:
    """Fix Eb/N0 from the symmetric error rate, then shift the threshold to hit ``q0_target``.

    Offsets of one or more are returned rather than clamped (with a warning), since
    small false-ACK targets at poor Eb/N0 need them.
    """
    if not 0.0 < p_target < 0.5:
        raise ValueError(f"p_target must lie in (0, 0.5), got {p_target}")
    if not 0.0 < q0_target <= p_target:
        raise ValueError(f"q0_target must lie in (0, p_target], got {q0_target} with p_target={p_target}")
    ebn0 = ebn0_for_bep(p_target)
    if q0_target == p_target:
        return AsymDetectionParams(ebn0, 0.0, p_target, p_target)
    alpha = alpha_for_q0(ebn0, q0_target)
    q0, q1 = shifted_error_rates(ebn0, alpha)
    if alpha >= 1.0:
        warnings.warn(
            f"threshold offset alpha={alpha:.4g} lies beyond the ACK constellation point",
            RuntimeWarning,
            stacklevel=2,
        )
    return AsymDetectionParams(ebn0, alpha, q0, q1)


def asym_from_alpha(p_target: float, alpha: float) -> AsymDetectionParams:
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    ebn0 = ebn0_for_bep(p_target)
    if alpha == 0.0:
        return AsymDetectionParams(ebn0, 0.0, p_target, p_target)
    q0, q1 = shifted_error_rates(ebn0, alpha)
    return AsymDetectionParams(ebn0, alpha, q0, q1)


def sample_feedback(sent: int, params: FeedbackChannelParams, rng: np.random.Generator) -> int:
    """Pass one feedback bit through the channel, drawing exactly one uniform."""
    flip = rng.random() < params.flip_probability(sent)
    return int(sent) ^ int(flip)
