"""Batched Monte Carlo estimation with reproducible substreams.

Packets are split into fixed-size blocks; block ``b`` draws from a Philox
generator keyed by ``SeedSequence(seed, spawn_key=(b,))``.  The block layout
depends only on ``(n_packets, block_size)``, never on the worker count, and
blocks are merged in index order from integer tallies, so results are
bit-identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .analytic import AnalyticPoint
from .blep import BlepModel
from .channel import FeedbackChannelParams
from .schemes.bcf import posterior_table
from .schemes.config import ConfigError, RetxPolicy, SchemeConfig, SchemeKind, effective_channel

BLOCK_SIZE = 1 << 16

_KIND_CODES = {
    SchemeKind.REG_SAW: K.KIND_SAW,
    SchemeKind.ASYM_SAW: K.KIND_SAW,
    SchemeKind.L_REP_ACK: K.KIND_LREP,
    SchemeKind.L_ACK_SAW: K.KIND_LACK,
    SchemeKind.RETX_L_ACK: K.KIND_RETX,
    SchemeKind.BLIND_RETX: K.KIND_BLIND,
}


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _uniform_budget(config: SchemeConfig, n: int) -> int:
    M, L = config.M, config.L
    kind = config.kind
    if kind is SchemeKind.BCF_SAW:
        # every RTT transmits one packet at most M times: one decode + one feedback draw
        return 2 * M * (n + L) + 8
    if kind is SchemeKind.L_REP_ACK:
        return n * M * (1 + L) + 8
    if kind is SchemeKind.L_ACK_SAW:
        return n * (2 * M + L) + 8
    return n * 2 * M + 8


def simulate_block(config, blep, channel, n, rng):
    """Run ``n`` packets through the compiled path; returns per-packet arrays.

    ``channel`` must already be the effective channel for the scheme.
    """
    u = rng.random(_uniform_budget(config, n))
    q = blep.conditional_table()[: config.M + 1].copy()
    decoded = np.zeros(n, np.bool_)
    declared = np.zeros(n, np.bool_)
    n_tx = np.zeros(n, np.int64)
    latency = np.zeros(n, np.int64)
    if config.kind is SchemeKind.BCF_SAW:
        if config.retx_policy is RetxPolicy.POSTERIOR_LIKELIHOOD:
            policy = K.POLICY_POSTERIOR
            post = posterior_table(config.M, config.L, blep.eps, channel.p0, channel.p1, blep.g)
        else:
            policy = K.POLICY_NEWEST
            post = np.zeros((1, 1, 1))
        used = K.bcf_kernel(config.M, config.L, q, channel.p0, channel.p1, n, policy, post, u,
                            decoded, declared, n_tx, latency)
        n_fb = n_tx.copy()
        delay = n_tx.copy()
    else:
        n_fb = np.zeros(n, np.int64)
        delay = np.zeros(n, np.int64)
        used = K.saw_kernel(_KIND_CODES[config.kind], config.M, config.L, q, channel.p0, channel.p1, n, u,
                            decoded, declared, n_tx, n_fb, delay, latency)
    if used > u.size:
        raise RuntimeError("uniform budget exceeded")
    return dict(decoded=decoded, declared=declared, n_tx=n_tx, n_fb=n_fb, delay=delay, latency=latency)


@dataclass
class _Tally:
    n: int = 0
    outage: int = 0
    declared: int = 0
    false_delivered: int = 0
    tx: int = 0
    tx2: int = 0
    delay: int = 0
    delay2: int = 0
    fb: int = 0
    hist: dict = field(default_factory=dict)

    def add(self, other: "_Tally") -> None:
        for name in ("n", "outage", "declared", "false_delivered", "tx", "tx2", "delay", "delay2", "fb"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        for k, c in other.hist.items():
            self.hist[k] = self.hist.get(k, 0) + c


def _tally(arrays, skip: int) -> _Tally:
    a = {k: v[skip:] for k, v in arrays.items()}
    lat = a["latency"][a["decoded"]]
    counts = np.bincount(lat) if lat.size else np.zeros(0, np.int64)
    return _Tally(
        n=int(a["decoded"].size),
        outage=int((~a["decoded"]).sum()),
        declared=int(a["declared"].sum()),
        false_delivered=int((a["declared"] & ~a["decoded"]).sum()),
        tx=int(a["n_tx"].sum()),
        tx2=int((a["n_tx"] ** 2).sum()),
        delay=int(a["delay"].sum()),
        delay2=int((a["delay"] ** 2).sum()),
        fb=int(a["n_fb"].sum()),
        hist={int(k): int(c) for k, c in enumerate(counts) if c},
    )


def _run_block(args) -> _Tally:
    config, blep, channel, seed, block, size = args
    warmup = config.L if config.kind is SchemeKind.BCF_SAW else 0
    arrays = simulate_block(config, blep, channel, size + warmup, block_rng(seed, block))
    return _tally(arrays, warmup)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a, k + 1, n - k))
    return lo, hi


def _mean_se(s: int, s2: int, n: int) -> tuple[float, float]:
    mean = s / n
    if n < 2:
        return mean, math.inf
    var = max(s2 - s * s / n, 0.0) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class TrialMetrics:
    """Monte Carlo estimates for one (scheme, BLEP, channel) point.

    ``t_bar_hat`` is the mean number of RTTs a packet holds the process and
    ``fb_bar_hat`` the mean number of feedback reports sent for it.
    """

    config: SchemeConfig
    n_packets: int
    outage_count: int
    p_out_hat: float
    p_out_ci: tuple[float, float]
    n_bar_hat: float
    n_bar_se: float
    t_bar_hat: float
    t_bar_se: float
    fb_bar_hat: float
    declared_count: int
    false_delivered_count: int
    latency_hist: dict
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def latency_masses(self) -> np.ndarray:
        top = max(self.latency_hist, default=-1)
        out = np.zeros(top + 1)
        for k, c in self.latency_hist.items():
            out[k] = c / self.n_packets
        return out


def estimate(
    config: SchemeConfig,
    blep: BlepModel,
    channel: FeedbackChannelParams,
    n_packets: int,
    seed: int,
    workers: int = 1,
    *,
    block_size: int = BLOCK_SIZE,
) -> TrialMetrics:
    """Simulate ``n_packets`` packets and summarize them."""
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if config.M > blep.max_attempts:
        raise ConfigError(f"BLEP model covers {blep.max_attempts} attempts but M = {config.M}")
    eff = effective_channel(config, channel)
    sizes = [block_size] * (n_packets // block_size)
    if n_packets % block_size:
        sizes.append(n_packets % block_size)
    jobs = [(config, blep, eff, seed, b, s) for b, s in enumerate(sizes)]
    if workers == 1 or len(jobs) == 1:
        parts = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, jobs))
    total = _Tally()
    for part in parts:
        total.add(part)
    n = total.n
    n_bar, n_se = _mean_se(total.tx, total.tx2, n)
    t_bar, t_se = _mean_se(total.delay, total.delay2, n)
    meta = {"block_size": block_size, "blocks": len(sizes), "generator": "Philox/SeedSequence(seed, spawn_key=(block,))"}
    if config.kind is SchemeKind.BCF_SAW:
        meta["warmup_excluded_per_block"] = config.L
        meta["tail_flushed_per_block"] = config.L
    return TrialMetrics(
        config=config,
        n_packets=n,
        outage_count=total.outage,
        p_out_hat=total.outage / n,
        p_out_ci=clopper_pearson(total.outage, n),
        n_bar_hat=n_bar,
        n_bar_se=n_se,
        t_bar_hat=t_bar,
        t_bar_se=t_se,
        fb_bar_hat=total.fb / n,
        declared_count=total.declared,
        false_delivered_count=total.false_delivered,
        latency_hist=dict(sorted(total.hist.items())),
        seed=seed,
        meta=meta,
    )


@dataclass
class AgreementReport:
    z: dict
    flagged: list
    threshold: float = 3.0

    @property
    def ok(self) -> bool:
        return not self.flagged


def _z(diff: float, se: float) -> float:
    if se > 0:
        return diff / se
    return 0.0 if abs(diff) < 1e-12 else math.copysign(math.inf, diff)


def compare_to_analytic(metrics: TrialMetrics, analytic: AnalyticPoint, threshold: float = 3.0) -> AgreementReport:
    """z-scores of the simulated P_out, N-bar and T-bar against closed-form values."""
    if metrics.config.kind is SchemeKind.BCF_SAW:
        raise ValueError("no closed form for BCF-SAW")
    a, m = analytic.config, metrics.config
    if (a.kind, a.M, a.L, a.q0_cap, a.alpha) != (m.kind, m.M, m.L, m.q0_cap, m.alpha):
        raise ValueError(f"scheme mismatch: {a.label} vs {m.label}")
    n = metrics.n_packets
    p = analytic.p_out
    z = {
        "p_out": _z(metrics.p_out_hat - p, math.sqrt(p * (1 - p) / n)),
        "n_bar": _z(metrics.n_bar_hat - analytic.n_bar, metrics.n_bar_se),
        "t_bar": _z(metrics.t_bar_hat - analytic.t_bar, metrics.t_bar_se),
    }
    flagged = [k for k, v in z.items() if abs(v) > threshold]
    return AgreementReport(z, flagged, threshold)
