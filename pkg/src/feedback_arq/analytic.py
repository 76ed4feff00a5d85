"""Closed-form outage, attempts, delay and latency for the non-BCF schemes.

Formulas take the cumulative BLEPs ``eps_m`` from a :class:`BlepModel`, so
they hold for any combining gain.  Three printed rows are wrong as written
(L-ACK-SAW attempts/delay, L-ACK-SAW latency, ReTx-L-ACK attempts); for those,
the default evaluation uses a corrected derivation that agrees with
exhaustive enumeration of the outcome tree, and ``as_printed=True`` evaluates
the row exactly as tabulated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .blep import BlepModel
from .channel import FeedbackChannelParams
from .schemes.config import ConfigError, SchemeConfig, SchemeKind, effective_channel


class UnsupportedForm(NotImplementedError):
    """No closed form exists for this scheme/metric combination."""


def binom(n: int, k: int) -> float:
    """Binomial coefficient via log-gamma; C(-1, -1) = 1 so the M = 1 rows stay valid."""
    if k == n:
        return 1.0
    if k < 0 or k > n:
        return 0.0
    if n < 64:
        return float(math.comb(n, k))
    return float(np.exp(special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)))


def _geom(r: float, n: int) -> float:
    """r + r^2 + ... + r^n."""
    if n <= 0:
        return 0.0
    if r == 1.0:
        return float(n)
    return r * (1.0 - r**n) / (1.0 - r)


def _prep(config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams):
    if config.kind is SchemeKind.BCF_SAW:
        raise UnsupportedForm("BCF-SAW has no closed form; use Monte Carlo")
    if config.M > blep.max_attempts:
        raise ConfigError(f"BLEP model covers {blep.max_attempts} attempts but M = {config.M}")
    ch = effective_channel(config, channel)
    return config.M, config.L, blep.cumulative_table()[: config.M + 1], ch.p0, ch.p1


def _feedback_rates(kind: SchemeKind, L: int, p0: float, p1: float) -> tuple[float, float]:
    # L-Rep-ACK behaves like Reg-SAW with a composite L-observation report
    if kind is SchemeKind.L_REP_ACK:
        return p0**L, 1.0 - (1.0 - p1) ** L
    return p0, p1


# ---------------------------------------------------------------------------
# outage


def outage_closed_form(config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams) -> float:
    """Outage probability for finite M."""
    M, L, e, p0, p1 = _prep(config, blep, channel)
    kind = config.kind
    if kind is SchemeKind.BLIND_RETX:
        return float(e[M])
    if kind in (SchemeKind.REG_SAW, SchemeKind.ASYM_SAW, SchemeKind.L_REP_ACK):
        a, _ = _feedback_rates(kind, L, p0, p1)
        return sum(e[m] * a * (1 - a) ** (m - 1) for m in range(1, M)) + e[M] * (1 - a) ** (M - 1)
    if kind is SchemeKind.L_ACK_SAW:
        first = sum(e[m] * p0**L * (1 - p0) ** (m - 1) * binom(L + m - 2, m - 1) for m in range(1, M))
        tail = sum(p0**l * binom(l + M - 2, M - 2) for l in range(L))
        return first + e[M] * (1 - p0) ** (M - 1) * tail
    if kind is SchemeKind.RETX_L_ACK:
        first = sum(e[m] * p0**L * (1 - p0) ** (m - L) * binom(m - 1, L - 1) for m in range(L, M))
        # (p0 / (1 - p0))^l (1 - p0)^(M-1) written without the division
        tail = sum(p0**l * (1 - p0) ** (M - 1 - l) * binom(M - 1, l) for l in range(L))
        return first + e[M] * tail
    raise UnsupportedForm(kind)


def outage_asymptotic_bound(config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams) -> float:
    """M -> infinity column: upper bounds (Reg-SAW, L-Rep, Asym) or approximations (L-ACK, ReTx-L-ACK).

    Assumes no combining gain, i.e. ``eps_m = eps ** m``.
    """
    if blep.g != 1.0:
        raise UnsupportedForm("the M -> infinity column assumes g = 1")
    if config.kind is SchemeKind.BCF_SAW:
        raise UnsupportedForm("BCF-SAW has no closed form; use Monte Carlo")
    ch = effective_channel(config, channel)
    p0, eps, L = ch.p0, blep.eps, config.L
    kind = config.kind
    if kind is SchemeKind.BLIND_RETX:
        return 0.0
    if kind in (SchemeKind.REG_SAW, SchemeKind.ASYM_SAW, SchemeKind.L_REP_ACK):
        a, _ = _feedback_rates(kind, L, p0, ch.p1)
        return eps * a / (1 - eps * (1 - a))
    lead = eps if kind is SchemeKind.L_ACK_SAW else eps**L
    return lead * p0**L * (1 + eps * (1 - p0) / (math.factorial(L - 1) * (1 - eps * (1 - p0)) ** L))


# ---------------------------------------------------------------------------
# average number of transmissions


def _nbar_saw(M, e, a, b) -> float:
    """Reg-SAW structure with false-ACK rate a and false-NACK rate b."""
    first = sum(e[m - 1] * (1 - a) ** (m - 1) for m in range(1, M + 1))
    extra = sum((e[m - 1] - e[m]) * (1 - a) ** (m - 1) * _geom(b, M - m) for m in range(1, M))
    return first + extra


def _lack_recursion(M, L, e, p0, p1, *, occupancy: bool, as_printed: bool) -> float:
    """Expected attempts (or occupied RTTs) for L-ACK-SAW by recursion on (ACKs needed, attempts left).

    X[l][m]: packet undecoded, l ACKs still needed, m retransmissions left.
    Y[l][m]: same with the packet decoded.
    """

    def g(m):
        den = e[M - m]
        return 0.0 if den == 0 else e[M - m + 1] / den

    X = np.zeros((L + 1, M))
    Y = np.zeros((L + 1, M))
    if as_printed:
        # The printed Y recursion keeps the same m on both sides, i.e. a decoded
        # packet is retransmitted without limit; solve it algebraically.
        for m in range(M):
            for l in range(1, L + 1):
                rest = sum((1 - p1) ** (l - lp) * (1 + Y[lp, m]) for lp in range(1, l))
                Y[l, m] = np.inf if p1 == 1 else p1 * (1 + rest) / (1 - p1)
        for m in range(1, M):
            gm = g(m)
            for l in range(1, L + 1):
                X[l, m] = (1 - p0) * sum(
                    p0 ** (l - lp) * ((l - lp + 1 if occupancy else 1) + gm * X[lp, m - 1] + (1 - gm) * Y[lp, m - 1])
                    for lp in range(1, l + 1)
                )
        gM = g(M)
        return float(1 + gM * X[L, M - 1] + (1 - gM) * Y[L, M - 1])

    # Corrected: Y steps down in m like X.  For occupancy every feedback
    # occasion counts, including the ACKs that end the packet and the
    # occasions after the last attempt.
    if not occupancy:
        for m in range(1, M):
            gm = g(m)
            for l in range(1, L + 1):
                Y[l, m] = p1 * sum((1 - p1) ** (l - lp) * (1 + Y[lp, m - 1]) for lp in range(1, l + 1))
                X[l, m] = (1 - p0) * sum(
                    p0 ** (l - lp) * (1 + gm * X[lp, m - 1] + (1 - gm) * Y[lp, m - 1]) for lp in range(1, l + 1)
                )
        gM = g(M)
        return float(1 + gM * X[L, M - 1] + (1 - gM) * Y[L, M - 1])
    return _lack_occupancy(M, L, e, p0, p1)


def _lack_occupancy(M, L, e, p0, p1) -> float:
    """Expected feedback occasions per packet for L-ACK-SAW.

    U[l][m] / D[l][m]: expected occasions from the next report on, packet
    undecoded / decoded, l ACKs still needed, m retransmissions left.  A report
    is ACK with prob. a (ending the packet if it was the last needed) or NACK
    (retransmission if m > 0, else the packet ends as failed).
    """

    def g(m):
        den = e[M - m]
        return 0.0 if den == 0 else e[M - m + 1] / den

    U = np.zeros((L + 1, M))
    D = np.zeros((L + 1, M))
    for m in range(M):
        gm = g(m) if m > 0 else 0.0
        for l in range(1, L + 1):
            for table, ack in ((D, 1 - p1), (U, p0)):
                nack = 1 - ack
                after_ack = 0.0 if l == 1 else table[l - 1, m]
                if m == 0:
                    after_nack = 0.0
                elif table is D:
                    after_nack = D[l, m - 1]
                else:
                    after_nack = gm * U[l, m - 1] + (1 - gm) * D[l, m - 1]
                table[l, m] = 1 + ack * after_ack + nack * after_nack
    g1 = g(M)
    return float(g1 * U[L, M - 1] + (1 - g1) * D[L, M - 1])


def _retx_nbar(M, L, e, p0, p1, *, as_printed: bool) -> float:
    def rho(m, l):
        total = 0.0
        for k in range(max(L - m + l - 1, 0), min(l - 1, L - 1) + 1):
            total += (
                p0**k * (1 - p0) ** (l - k - 1) * (1 - p1) ** (L - k) * p1 ** (m + k + 1 - L - l)
                * binom(l - 1, k) * binom(m - l, L - k - 1)
            )
        return total

    def rho_M(l):
        total = 0.0
        for n in range(L):
            for k in range(max(n - M + l, 0), min(l - 1, n) + 1):
                total += (
                    p0**k * (1 - p0) ** (l - k - 1) * (1 - p1) ** (n - k) * p1 ** (M + k - l - n)
                    * binom(l - 1, k) * binom(M - l, n - k)
                )
        return total

    nbar = 0.0
    for m in range(L, M + 1):
        if m < M or as_printed:
            undec = e[m] * p0**L * (1 - p0) ** (m - L) * binom(m - 1, L - 1)
        else:
            # undecoded through all M attempts with fewer than L ACKs in the first M - 1 reports
            undec = e[M] * sum(p0**n * (1 - p0) ** (M - 1 - n) * binom(M - 1, n) for n in range(L))
        r = rho_M if (m == M) else (lambda l, m=m: rho(m, l))
        eta = undec + sum((e[l - 1] - e[l]) * r(l) for l in range(1, m + 1))
        nbar += m * eta
    return nbar


def nbar_closed_form(
    config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams, *, as_printed: bool = False
) -> float:
    """Average number of transmission attempts per packet, finite M."""
    M, L, e, p0, p1 = _prep(config, blep, channel)
    kind = config.kind
    if kind is SchemeKind.BLIND_RETX:
        return float(M)
    if kind in (SchemeKind.REG_SAW, SchemeKind.ASYM_SAW, SchemeKind.L_REP_ACK):
        a, b = _feedback_rates(kind, L, p0, p1)
        return _nbar_saw(M, e, a, b)
    if kind is SchemeKind.L_ACK_SAW:
        return _lack_recursion(M, L, e, p0, p1, occupancy=False, as_printed=as_printed)
    if kind is SchemeKind.RETX_L_ACK:
        return _retx_nbar(M, L, e, p0, p1, as_printed=as_printed)
    raise UnsupportedForm(kind)


def nbar_asymptotic_bound(config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams) -> float:
    """M -> infinity upper bound on the average attempts (g = 1); ReTx-L-ACK has none."""
    if blep.g != 1.0:
        raise UnsupportedForm("the M -> infinity column assumes g = 1")
    kind = config.kind
    if kind in (SchemeKind.BCF_SAW, SchemeKind.RETX_L_ACK):
        raise UnsupportedForm(f"no M -> infinity attempts bound for {kind.value}")
    if kind is SchemeKind.BLIND_RETX:
        return math.inf
    ch = effective_channel(config, channel)
    p0, p1, eps, L = ch.p0, ch.p1, blep.eps, config.L
    if kind is SchemeKind.L_ACK_SAW:
        return 1 + (eps * (1 - (1 - p0) ** L) + (1 - eps) * (1 - (1 - p1) ** L)) / (1 - p1) ** L
    if kind is SchemeKind.L_REP_ACK:
        good = (1 - p1) ** L
        return (good + (1 - eps) * (1 - good)) / (good * (1 - eps * (1 - p0**L)))
    return ((1 - p1) + (1 - eps) * p1) / ((1 - p1) * (1 - eps * (1 - p0)))


# ---------------------------------------------------------------------------
# average delay


def tbar_closed_form(
    config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams, *, as_printed: bool = False
) -> float:
    """Average number of RTTs a packet holds the process (one feedback occasion per RTT)."""
    M, L, e, p0, p1 = _prep(config, blep, channel)
    kind = config.kind
    if kind is SchemeKind.BLIND_RETX:
        return float(M)
    if kind is SchemeKind.L_REP_ACK:
        return L * nbar_closed_form(config, blep, channel)
    if kind is SchemeKind.L_ACK_SAW:
        return _lack_recursion(M, L, e, p0, p1, occupancy=True, as_printed=as_printed)
    return nbar_closed_form(config, blep, channel, as_printed=as_printed)


# ---------------------------------------------------------------------------
# latency distribution


def latency_support(config: SchemeConfig) -> range:
    """Values of k (latency TTI + k * RTT) that can carry mass."""
    M, L = config.M, config.L
    if config.kind is SchemeKind.L_REP_ACK:
        return range(0, (M - 1) * L + 1, L)
    if config.kind is SchemeKind.L_ACK_SAW:
        return range(0, M + L - 1)
    return range(0, M)


def latency_mass(
    config: SchemeConfig,
    blep: BlepModel,
    channel: FeedbackChannelParams,
    k: int,
    *,
    as_printed: bool = False,
) -> float:
    """Probability that the packet is first decoded exactly at TTI + k * RTT.

    The tabulated entries are masses at each k; the CDF is their running sum.
    For L-Rep-ACK the latency index counts base RTTs, so mass sits on multiples
    of L and ``k = n * L`` after n retransmissions.
    """
    M, L, e, p0, p1 = _prep(config, blep, channel)
    kind = config.kind
    if k < 0:
        return 0.0
    if kind is SchemeKind.BLIND_RETX:
        return float(e[k] - e[k + 1]) if k < M else 0.0
    if kind in (SchemeKind.REG_SAW, SchemeKind.ASYM_SAW):
        return float((1 - p0) ** k * (e[k] - e[k + 1])) if k < M else 0.0
    if kind is SchemeKind.L_REP_ACK:
        if k % L or k // L >= M:
            return 0.0
        n = k // L
        return float((1 - p0**L) ** n * (e[n] - e[n + 1]))
    if kind is SchemeKind.L_ACK_SAW:
        if k > M + L - 2:
            return 0.0
        if as_printed:
            ext = BlepModel(blep.eps, blep.g, M + L).cumulative_table()
            return float(sum(
                (1 - p0) ** k * (ext[k] - ext[k + 1]) * p0 ** (k - m) * binom(k - 1, m - 1)
                for m in range(max(1, k - L + 1), min(k, M - 1) + 1)
            ))
        if k == 0:
            return float(e[0] - e[1])
        # decoded on retransmission m (attempt m + 1) after m NACKs and k - m false ACKs,
        # the last report before that attempt being a NACK
        return float(sum(
            (1 - p0) ** m * (e[m] - e[m + 1]) * p0 ** (k - m) * binom(k - 1, m - 1)
            for m in range(max(1, k - L + 1), min(k, M - 1) + 1)
        ))
    if kind is SchemeKind.RETX_L_ACK:
        if k >= M:
            return 0.0
        if k < L:
            return float(e[k] - e[k + 1])
        return float(sum(
            (e[k] - e[k + 1]) * p0 ** (k - m) * (1 - p0) ** m * binom(k, m)
            for m in range(max(1, k - L + 1), k + 1)
        ))
    raise UnsupportedForm(kind)


def latency_masses(config, blep, channel, *, as_printed: bool = False) -> np.ndarray:
    """Masses for k = 0 .. max support (zeros off-support)."""
    top = latency_support(config)[-1]
    return np.array([latency_mass(config, blep, channel, k, as_printed=as_printed) for k in range(top + 1)])


def latency_ccdf(masses: np.ndarray) -> np.ndarray:
    """P(tau > t_k); its floor is the outage probability."""
    return 1.0 - np.cumsum(masses)


# ---------------------------------------------------------------------------


@dataclass
class AnalyticPoint:
    config: SchemeConfig
    blep: BlepModel
    channel: FeedbackChannelParams
    p_out: float
    n_bar: float
    t_bar: float
    latency_masses: np.ndarray = field(repr=False)


def analytic_point(config: SchemeConfig, blep: BlepModel, channel: FeedbackChannelParams) -> AnalyticPoint:
    return AnalyticPoint(
        config,
        blep,
        channel,
        outage_closed_form(config, blep, channel),
        nbar_closed_form(config, blep, channel),
        tbar_closed_form(config, blep, channel),
        latency_masses(config, blep, channel),
    )
