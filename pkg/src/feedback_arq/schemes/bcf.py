"""Backwards composite feedback SAW: transmitter and receiver automata.

Both ends hold L packet slots.  A slot is loaded round-robin each time the
new-data indicator (NDI) toggles, and the receiver answers every occasion with
one bit, the AND of the decode flags of all active slots.  An observed ACK
counts for every slot; an observed NACK starts a retransmission phase whose
slot order both ends derive from the same counters.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..blep import BlepModel
from .config import RetxPolicy, SchemeConfig


def composite_feedback(flags: Sequence[int]) -> int:
    """AND of the per-slot decode flags; an empty set is vacuously ACK."""
    return int(all(flags))


def recency_order(ndi_idx: int, L: int) -> list[int]:
    """Slot indices from the most recently loaded to the oldest."""
    return [(ndi_idx - j) % L for j in range(L)]


# ---------------------------------------------------------------------------
# retransmission order


# Histories are clamped to this many NACKs before scoring; the posterior has
# long converged by then and it keeps precomputed tables small.
POSTERIOR_NAK_CAP = 48


def _ordering_likelihood(tx: int, ack: int, nak: int, j: int, p0: float, p1: float) -> float:
    """Sum over chronologies of the feedback likelihood, packet first decoded at attempt j.

    A chronology interleaves the slot's ``ack + nak`` observed reports with its
    retransmissions: each retransmission directly follows a NACK and the most
    recent report is a NACK.  ``j > tx`` means never decoded.  Dynamic program
    over reports with state (ACKs placed, retransmissions placed).
    """
    n_fb = ack + nak
    f = np.zeros((ack + 1, tx))
    f[0, 0] = 1.0
    for i in range(n_fb):
        last = i == n_fb - 1
        g = np.zeros_like(f)
        for a in range(ack + 1):
            for t in range(tx):
                w = f[a, t]
                if w == 0.0:
                    continue
                decoded = t + 1 >= j
                w_ack, w_nak = ((1.0 - p1), p1) if decoded else (p0, 1.0 - p0)
                if not last and a < ack:
                    g[a + 1, t] += w * w_ack
                g[a, t] += w * w_nak
                if not last and t + 1 < tx:
                    g[a, t + 1] += w * w_nak
        f = g
    return float(f[ack, tx - 1])


@functools.lru_cache(maxsize=65536)
def _posterior(tx: int, ack: int, nak: int, eps: float, p0: float, p1: float, g: float) -> float:
    cum = BlepModel(eps, g, max(tx, 1)).cumulative_table()
    undecoded = cum[tx] * _ordering_likelihood(tx, ack, nak, tx + 1, p0, p1)
    decoded = sum((cum[j - 1] - cum[j]) * _ordering_likelihood(tx, ack, nak, j, p0, p1) for j in range(1, tx + 1))
    total = undecoded + decoded
    if total == 0.0:
        return float(cum[tx])
    return float(undecoded / total)


def posterior_table(M: int, L: int, eps: float, p0: float, p1: float, g: float) -> np.ndarray:
    """Scores indexed [tx, ack, nak] for every live-slot history (-1 where not reachable)."""
    table = np.full((M + 1, L + 1, POSTERIOR_NAK_CAP + 1), -1.0)
    for tx in range(1, M):
        for ack in range(L):
            for nak in range(tx, POSTERIOR_NAK_CAP + 1):
                table[tx, ack, nak] = _posterior(tx, ack, nak, eps, p0, p1, g)
    return table


def posterior_failure_probability(
    history: tuple[int, int, int], eps: float, p0: float, p1: float, g: float = 1.0
) -> float:
    """P(slot still undecoded | its transmission, ACK and NACK counts).

    Each observed composite bit is treated as a noisy report of this slot's own
    flag (the other slots are assumed decoded), and every chronology consistent
    with the counters is weighted equally: retransmissions of the slot follow
    NACKs and the most recent observation is a NACK.  If the history has zero
    likelihood under the model the prior ``eps_tx`` is returned.
    """
    tx, ack, nak = (int(v) for v in history)
    if tx < 1 or ack < 0 or nak < 0:
        raise ValueError(f"inconsistent slot history {history}")
    if nak < 1 or nak < tx:
        # each retransmission needs its own earlier NACK, plus the current one
        raise ValueError(f"slot history {history} needs at least tx NACKs ending in a NACK")
    return _posterior(tx, ack, nak, float(eps), float(p0), float(p1), float(g))


def retx_lookup(
    tx_counts: Sequence[int],
    ack_counts: Sequence[int],
    nak_counts: Sequence[int],
    recency: Sequence[int],
    policy: RetxPolicy,
    *,
    M: int,
    L: int,
    score: Callable[[int, int, int], float] | None = None,
) -> int | None:
    """Slot to retransmit after a composite NACK, or None when every slot is exhausted.

    A slot is a candidate while 0 < tx < M and it has fewer than L ACKs.
    ``NEWEST_FIRST`` takes the most recently loaded candidate.
    ``POSTERIOR_LIKELIHOOD`` takes the candidate with the highest ``score``
    (probability of being undecoded), ties going to the more recent slot.
    """
    candidates = [l for l in recency if 0 < tx_counts[l] < M and ack_counts[l] < L]
    if not candidates:
        return None
    if policy is RetxPolicy.NEWEST_FIRST:
        return candidates[0]
    if score is None:
        raise ValueError("posterior policy needs a score function")
    best, best_score = None, -1.0
    for l in candidates:
        s = score(tx_counts[l], ack_counts[l], nak_counts[l])
        if s > best_score:
            best, best_score = l, s
    return best


def posterior_scorer(eps: float, p0: float, p1: float, g: float) -> Callable[[int, int, int], float]:
    def score(tx, ack, nak):
        if nak < tx:
            # counters that cannot come from a live retransmission phase rank last
            return -1.0
        return _posterior(int(tx), int(ack), min(int(nak), POSTERIOR_NAK_CAP), eps, p0, p1, g)

    return score


# ---------------------------------------------------------------------------
# transmitter


class Eviction(NamedTuple):
    packet_id: int
    tx_attempts: int
    ack_count: int
    delivered: bool


class TxAction(NamedTuple):
    kind: str  # "new" or "retx"
    slot: int
    packet_id: int
    ndi: int
    evicted: Eviction | None = None


@dataclass
class BcfTxState:
    """Transmitter buffers and per-slot counters."""

    packets: list
    tx_counter: list
    ack_counter: list
    nak_counter: list
    ndi_toggle_idx: int
    ndi_bit: int = 0
    retx_indx: int | None = None
    next_packet_id: int = 0

    @classmethod
    def initial(cls, L: int) -> "BcfTxState":
        # the first step goes down the new-packet path and lands on slot 0
        return cls([None] * L, [0] * L, [0] * L, [0] * L, L - 1)

    def copy(self) -> "BcfTxState":
        return dataclasses.replace(
            self,
            packets=list(self.packets),
            tx_counter=list(self.tx_counter),
            ack_counter=list(self.ack_counter),
            nak_counter=list(self.nak_counter),
        )


def _load_new_packet(s: BcfTxState, config: SchemeConfig) -> tuple[BcfTxState, TxAction]:
    L = config.L
    s.ndi_bit ^= 1
    s.ndi_toggle_idx = (s.ndi_toggle_idx + 1) % L
    k = s.ndi_toggle_idx
    evicted = None
    if s.packets[k] is not None:
        evicted = Eviction(s.packets[k], s.tx_counter[k], s.ack_counter[k], s.ack_counter[k] >= L)
    pid = s.next_packet_id
    s.next_packet_id += 1
    s.packets[k] = pid
    s.ack_counter[k] = 0
    s.nak_counter[k] = 0
    s.tx_counter[k] = 1
    s.retx_indx = None
    return s, TxAction("new", k, pid, s.ndi_bit, evicted)


def bcf_tx_step(
    state: BcfTxState,
    observed_feedback: int,
    config: SchemeConfig,
    score: Callable[[int, int, int], float] | None = None,
) -> tuple[BcfTxState, TxAction]:
    """Advance the transmitter by one RTT given the feedback bit it observed.

    Returns a new state and the action for the next transmit occasion.  The
    input state is not modified.
    """
    s = state.copy()
    M, L = config.M, config.L
    if observed_feedback:
        for l in range(L):
            s.ack_counter[l] += 1
        return _load_new_packet(s, config)
    if all(t in (0, M) for t in s.tx_counter):
        # nothing left to retransmit: new packet without counting an ACK
        return _load_new_packet(s, config)
    for l in range(L):
        s.nak_counter[l] += 1
    idx = retx_lookup(
        s.tx_counter, s.ack_counter, s.nak_counter,
        recency_order(s.ndi_toggle_idx, L), config.retx_policy, M=M, L=L, score=score,
    )
    if idx is None:
        # only reachable when every live slot already holds L ACKs
        return _load_new_packet(s, config)
    s.retx_indx = idx
    s.tx_counter[idx] += 1
    return s, TxAction("retx", idx, s.packets[idx], s.ndi_bit)


# ---------------------------------------------------------------------------
# receiver


@dataclass
class BcfRxState:
    """Receiver counters and per-slot decode flags (the combining buffer is its reception count)."""

    rx_counter: list
    ack_counter: list
    nak_counter: list
    decode_flags: list
    ndi_toggle_idx: int
    last_ndi: int = 0

    @classmethod
    def initial(cls, L: int) -> "BcfRxState":
        return cls([0] * L, [0] * L, [0] * L, [0] * L, L - 1)

    def copy(self) -> "BcfRxState":
        return dataclasses.replace(
            self,
            rx_counter=list(self.rx_counter),
            ack_counter=list(self.ack_counter),
            nak_counter=list(self.nak_counter),
            decode_flags=list(self.decode_flags),
        )

    def active_slots(self, M: int) -> list[int]:
        L = len(self.rx_counter)
        return [l for l in range(L) if l == self.ndi_toggle_idx or 0 < self.rx_counter[l] < M]


class RxEvent(NamedTuple):
    slot: int
    new_packet: bool
    newly_decoded: bool


def bcf_rx_step(
    state: BcfRxState,
    ndi_observed: int,
    blep: BlepModel,
    rng: np.random.Generator,
    config: SchemeConfig,
    score: Callable[[int, int, int], float] | None = None,
) -> tuple[BcfRxState, int, RxEvent]:
    """Process one reception and produce the composite feedback bit.

    A decode draw happens only for a slot that is not yet decoded; the attempt
    index is the slot's reception count so combining gain accumulates.
    """
    s = state.copy()
    M, L = config.M, config.L
    if ndi_observed != s.last_ndi:
        s.last_ndi = ndi_observed
        for l in range(L):
            s.ack_counter[l] += 1
        s.ndi_toggle_idx = (s.ndi_toggle_idx + 1) % L
        k = s.ndi_toggle_idx
        s.rx_counter[k] = 1
        s.ack_counter[k] = 0
        s.nak_counter[k] = 0
        s.decode_flags[k] = int(blep.sample_decode(1, rng))
        event = RxEvent(k, True, bool(s.decode_flags[k]))
    else:
        for l in range(L):
            s.nak_counter[l] += 1
        k = retx_lookup(
            s.rx_counter, s.ack_counter, s.nak_counter,
            recency_order(s.ndi_toggle_idx, L), config.retx_policy, M=M, L=L, score=score,
        )
        if k is None:
            raise RuntimeError("retransmission received but no slot is eligible; NDI out of sync")
        s.rx_counter[k] += 1
        newly = False
        if not s.decode_flags[k]:
            s.decode_flags[k] = int(blep.sample_decode(s.rx_counter[k], rng))
            newly = bool(s.decode_flags[k])
        event = RxEvent(k, False, newly)
    fb = composite_feedback([s.decode_flags[l] for l in s.active_slots(M)])
    return s, fb, event
