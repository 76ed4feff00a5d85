"""Scheme configuration and per-packet outcome records."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from ..channel import FeedbackChannelParams, asym_from_alpha, solve_asym_params


class ConfigError(ValueError):
    """Invalid or inconsistent scheme configuration."""


class SchemeKind(str, enum.Enum):
    REG_SAW = "regsaw"
    L_REP_ACK = "lrep"
    L_ACK_SAW = "lack"
    RETX_L_ACK = "retxlack"
    ASYM_SAW = "asym"
    BLIND_RETX = "blind"
    BCF_SAW = "bcf"


class RetxPolicy(str, enum.Enum):
    NEWEST_FIRST = "newest"
    POSTERIOR_LIKELIHOOD = "posterior"


# kinds that ignore L (always one ACK per packet)
SINGLE_ACK_KINDS = {SchemeKind.REG_SAW, SchemeKind.ASYM_SAW, SchemeKind.BLIND_RETX}


@dataclass(frozen=True)
class SchemeConfig:
    """Which acknowledgment scheme to run and its parameters.

    ``M`` caps transmission attempts per packet; ``L`` is the feedback diversity
    order (repetitions for L-Rep-ACK, required ACK count for the others).
    Asym-SAW takes either a false-ACK cap ``q0_cap`` (the target becomes
    ``min(q0_cap, p)``) or an explicit threshold offset ``alpha``.
    """

    kind: SchemeKind
    M: int
    L: int = 1
    tti: float = 1.0
    rtt: float = 1.0
    retx_policy: RetxPolicy = RetxPolicy.NEWEST_FIRST
    q0_cap: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        object.__setattr__(self, "retx_policy", RetxPolicy(self.retx_policy))
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"L must be a positive integer, got {self.L}")
        if self.kind in SINGLE_ACK_KINDS and self.L != 1:
            raise ConfigError(f"{self.kind.value} requires L = 1, got L = {self.L}")
        if self.kind is SchemeKind.RETX_L_ACK and self.L > self.M:
            raise ConfigError(f"retxlack requires L <= M, got L = {self.L}, M = {self.M}")
        if self.tti < 0 or self.rtt <= 0:
            raise ConfigError("tti must be >= 0 and rtt > 0")
        if self.kind is not SchemeKind.ASYM_SAW and (self.q0_cap is not None or self.alpha is not None):
            raise ConfigError("q0_cap / alpha only apply to asym")
        if self.q0_cap is not None and self.alpha is not None:
            raise ConfigError("give either q0_cap or alpha, not both")
        if self.q0_cap is not None and not 0.0 < self.q0_cap <= 1.0:
            raise ConfigError(f"q0_cap must lie in (0, 1], got {self.q0_cap}")
        if self.alpha is not None and self.alpha < 0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")

    @property
    def label(self) -> str:
        name = self.kind.value
        if self.kind not in SINGLE_ACK_KINDS:
            name += f"-L{self.L}"
        if self.q0_cap is not None:
            name += f"-q0cap{self.q0_cap:g}"
        if self.alpha is not None:
            name += f"-alpha{self.alpha:g}"
        return name

    def latency(self, k: int) -> float:
        """Delivery latency TTI + k * RTT."""
        return self.tti + k * self.rtt


def effective_channel(config: SchemeConfig, channel: FeedbackChannelParams) -> FeedbackChannelParams:
    """Feedback error rates the scheme actually experiences.

    Only Asym-SAW changes anything: it needs a symmetric channel p0 = p1 = p and
    replaces it with the shifted-threshold rates (q0, q1).
    """
    if config.kind is not SchemeKind.ASYM_SAW:
        return channel
    if config.alpha is None and config.q0_cap is None or config.alpha == 0.0:
        return channel
    if channel.p0 != channel.p1:
        raise ConfigError("asym needs a symmetric feedback channel (p0 == p1)")
    p = channel.p0
    if config.alpha is None and config.q0_cap >= p:
        return channel
    if p == 0.0:
        return channel
    if not p < 0.5:
        raise ConfigError(f"asym needs p < 0.5, got {p}")
    if config.alpha is not None:
        return asym_from_alpha(p, config.alpha).channel()
    return solve_asym_params(p, config.q0_cap).channel()


@dataclass(slots=True)
class PacketOutcome:
    """What happened to one offered packet.

    ``latency_k`` is the number of RTTs between the first transmission and the
    first successful decode (``None`` if never decoded); ``decode_latency`` is
    the same as a duration, TTI + k * RTT.  ``delay_rtts`` is the number of
    RTTs the packet held the process (T), while ``feedback_occasions`` counts
    reports the receiver actually sent for it; they differ only for blind
    retransmission, which sends none.
    """

    packet_id: int
    delivered_declared: bool
    decoded_truth: bool
    tx_attempts: int
    feedback_occasions: int
    delay_rtts: int
    latency_k: int | None
    decode_latency: float | None = None

    @property
    def outage(self) -> bool:
        return not self.decoded_truth
