"""Drive a scheme over a stream of packets (pure-Python reference path)."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from ..blep import BlepModel
from ..channel import FeedbackChannelParams, sample_feedback
from .bcf import BcfRxState, BcfTxState, bcf_rx_step, bcf_tx_step, posterior_scorer
from .config import ConfigError, PacketOutcome, RetxPolicy, SchemeConfig, SchemeKind, effective_channel
from .saw import PACKET_RUNNERS


def _check(config: SchemeConfig, blep: BlepModel) -> None:
    if config.M > blep.max_attempts:
        raise ConfigError(f"BLEP model covers {blep.max_attempts} attempts but M = {config.M}")


def run_scheme(
    config: SchemeConfig,
    blep: BlepModel,
    channel: FeedbackChannelParams,
    n_packets: int,
    rng: np.random.Generator,
    *,
    sync_check: bool = False,
) -> Iterator[PacketOutcome]:
    """Yield one :class:`PacketOutcome` per offered packet, in packet order.

    For BCF-SAW, L extra packets are started after the last offered one so that
    every offered packet is evicted and gets a final verdict; those flush
    packets are not reported.  ``sync_check`` asserts after each RTT that the
    BCF receiver counters mirror the transmitter's.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    _check(config, blep)
    channel = effective_channel(config, channel)
    if config.kind is SchemeKind.BCF_SAW:
        yield from _run_bcf(config, blep, channel, n_packets, rng, sync_check)
        return
    step = PACKET_RUNNERS[config.kind]
    for pid in range(n_packets):
        yield step(pid, config, blep, channel, rng)


def _run_bcf(config, blep, channel, n_packets, rng, sync_check):
    L = config.L
    score = None
    if config.retx_policy is RetxPolicy.POSTERIOR_LIKELIHOOD:
        score = posterior_scorer(blep.eps, channel.p0, channel.p1, blep.g)
    tx = BcfTxState.initial(L)
    rx = BcfRxState.initial(L)
    first_rtt = {}
    decode_rtt = {}
    observed = 1
    rtt = 0
    emitted = 0
    while emitted < n_packets:
        tx, action = bcf_tx_step(tx, observed, config, score)
        ev = action.evicted
        if ev is not None and ev.packet_id < n_packets:
            k = decode_rtt.pop(ev.packet_id, None)
            start = first_rtt.pop(ev.packet_id)
            if k is not None:
                k -= start
            yield PacketOutcome(
                ev.packet_id, ev.delivered, k is not None, ev.tx_attempts, ev.tx_attempts,
                ev.tx_attempts, k, None if k is None else config.latency(k),
            )
            emitted += 1
        if action.kind == "new":
            first_rtt[action.packet_id] = rtt
        rx, fb, rx_event = bcf_rx_step(rx, action.ndi, blep, rng, config, score)
        if rx_event.slot != action.slot:
            raise RuntimeError(f"receiver combined slot {rx_event.slot}, transmitter sent slot {action.slot}")
        if rx_event.newly_decoded:
            decode_rtt[action.packet_id] = rtt
        if sync_check:
            assert rx.rx_counter == tx.tx_counter, (rx.rx_counter, tx.tx_counter)
            assert rx.ndi_toggle_idx == tx.ndi_toggle_idx
        observed = sample_feedback(fb, channel, rng)
        rtt += 1
