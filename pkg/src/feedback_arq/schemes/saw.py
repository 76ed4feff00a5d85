"""Reference automata for the single-outstanding-packet schemes.

Every scheme here keeps one packet in flight, so a run is a sequence of
independent per-packet episodes sharing one random stream.  Random draws
follow one convention across all schemes: each transmission of a not yet
decoded packet draws one uniform for decoding, each feedback occasion draws one
uniform for the channel.  That convention is what makes the L = 1 variants
draw-for-draw identical to Reg-SAW.
"""
from __future__ import annotations

import numpy as np

from ..blep import BlepModel
from ..channel import FeedbackChannelParams, sample_feedback
from .config import PacketOutcome, SchemeConfig, SchemeKind


class _Receiver:
    """Decode state of the single in-flight packet."""

    __slots__ = ("blep", "rng", "attempts", "decoded", "latency_k")

    def __init__(self, blep: BlepModel, rng: np.random.Generator):
        self.blep = blep
        self.rng = rng
        self.attempts = 0
        self.decoded = False
        self.latency_k = None

    def receive(self, t: int) -> None:
        self.attempts += 1
        if not self.decoded and self.blep.sample_decode(self.attempts, self.rng):
            self.decoded = True
            self.latency_k = t


def _outcome(pid, config, rx, delivered, fb, delay) -> PacketOutcome:
    lat = None if rx.latency_k is None else config.latency(rx.latency_k)
    return PacketOutcome(pid, delivered, rx.decoded, rx.attempts, fb, delay, rx.latency_k, lat)


def reg_saw_packet(pid, config, blep, channel, rng) -> PacketOutcome:
    """Retransmit on every observed NACK until an ACK or M attempts (also used by Asym-SAW)."""
    rx = _Receiver(blep, rng)
    for a in range(1, config.M + 1):
        rx.receive(a - 1)
        if sample_feedback(int(rx.decoded), channel, rng):
            return _outcome(pid, config, rx, True, a, a)
    return _outcome(pid, config, rx, False, config.M, config.M)


def l_rep_ack_packet(pid, config, blep, channel, rng) -> PacketOutcome:
    """Each report is repeated over L occasions; delivered only if all L read ACK."""
    L = config.L
    rx = _Receiver(blep, rng)
    for a in range(1, config.M + 1):
        rx.receive((a - 1) * L)
        sent = int(rx.decoded)
        # all L observations are drawn even after a NACK shows up
        acks = sum(sample_feedback(sent, channel, rng) for _ in range(L))
        if acks == L:
            return _outcome(pid, config, rx, True, a * L, a * L)
    return _outcome(pid, config, rx, False, config.M * L, config.M * L)


def l_ack_saw_packet(pid, config, blep, channel, rng) -> PacketOutcome:
    """Count ACKs (not necessarily consecutive) until L; each NACK triggers a retransmission.

    After an ACK that does not complete the count the next transmit occasion is
    left empty and the receiver reports again.  Once M attempts are spent a
    NACK ends the packet as failed.
    """
    rx = _Receiver(blep, rng)
    t = 0
    acks = 0
    rx.receive(t)
    while True:
        obs = sample_feedback(int(rx.decoded), channel, rng)
        if obs:
            acks += 1
            if acks == config.L:
                return _outcome(pid, config, rx, True, t + 1, t + 1)
        elif rx.attempts == config.M:
            return _outcome(pid, config, rx, False, t + 1, t + 1)
        t += 1
        if not obs:
            rx.receive(t)


def retx_l_ack_packet(pid, config, blep, channel, rng) -> PacketOutcome:
    """Retransmit every RTT until L ACKs have been observed or M attempts are spent."""
    rx = _Receiver(blep, rng)
    acks = 0
    for a in range(1, config.M + 1):
        rx.receive(a - 1)
        acks += sample_feedback(int(rx.decoded), channel, rng)
        if acks == config.L:
            return _outcome(pid, config, rx, True, a, a)
    return _outcome(pid, config, rx, False, config.M, config.M)


def blind_retx_packet(pid, config, blep, channel, rng) -> PacketOutcome:
    """M transmissions, no feedback; the packet holds the process for M RTTs."""
    rx = _Receiver(blep, rng)
    for a in range(1, config.M + 1):
        rx.receive(a - 1)
    return _outcome(pid, config, rx, True, 0, config.M)


PACKET_RUNNERS = {
    SchemeKind.REG_SAW: reg_saw_packet,
    SchemeKind.ASYM_SAW: reg_saw_packet,
    SchemeKind.L_REP_ACK: l_rep_ack_packet,
    SchemeKind.L_ACK_SAW: l_ack_saw_packet,
    SchemeKind.RETX_L_ACK: retx_l_ack_packet,
    SchemeKind.BLIND_RETX: blind_retx_packet,
}
