"""Acknowledgment schemes as transmitter/receiver automata."""
from .bcf import (
    BcfRxState,
    BcfTxState,
    Eviction,
    TxAction,
    bcf_rx_step,
    bcf_tx_step,
    composite_feedback,
    posterior_failure_probability,
    posterior_scorer,
    recency_order,
    retx_lookup,
)
from .config import (
    ConfigError,
    PacketOutcome,
    RetxPolicy,
    SchemeConfig,
    SchemeKind,
    effective_channel,
)
from .runner import run_scheme

__all__ = [
    "BcfRxState", "BcfTxState", "ConfigError", "Eviction", "PacketOutcome", "RetxPolicy",
    "SchemeConfig", "SchemeKind", "TxAction", "bcf_rx_step", "bcf_tx_step", "composite_feedback",
    "effective_channel", "posterior_failure_probability", "posterior_scorer", "recency_order",
    "retx_lookup", "run_scheme",
]
