"""
Backwards composite feedback, step by step
==========================================

L = 2 packets share every feedback report: the receiver sends the AND of
the decode flags of the packets it still considers active.  We drive the
transmitter by hand with a fixed sequence of observed bits and print its
counters, then ask the posterior order which packet to retransmit.
"""
from feedback_arq import SchemeConfig
from feedback_arq.schemes import BcfTxState, bcf_tx_step, posterior_failure_probability

from feedback_arq.schemes.bcf import posterior_scorer

eps, p = 0.1, 1e-3

# An ACK starts things off, ACK for packet 1, ACK, then two NACKs in a row.
# Run it once with the default newest-first order and once with the posterior order.
for policy in ("newest", "posterior"):
    cfg = SchemeConfig("bcf", M=4, L=2, retx_policy=policy)
    score = posterior_scorer(eps, p, p, 1.0) if policy == "posterior" else None
    s = BcfTxState.initial(2)
    print(f"--- {policy} order")
    for i, observed in enumerate([1, 1, 1, 0, 0], start=1):
        s, act = bcf_tx_step(s, observed, cfg, score)
        ev = f"  evicts packet {act.evicted.packet_id} (delivered={act.evicted.delivered})" if act.evicted else ""
        print(f"i={i} observed={observed} -> {act.kind:>4} packet {act.packet_id} in slot {act.slot}, "
              f"TX={s.tx_counter} ACK={s.ack_counter} NAK={s.nak_counter}{ev}")

# After a composite NACK the transmitter has to guess which packet failed.
# Packet 1 already collected an ACK, packet 2 only ever saw the NACK:
print("\nP(undecoded | history) with eps = 0.1, p = 1e-3")
for name, hist in [("older packet, (tx=1, ack=1, nak=1)", (1, 1, 1)), ("newer packet, (tx=1, ack=0, nak=1)", (1, 0, 1))]:
    print(f"  {name}: {posterior_failure_probability(hist, eps, p, p):.4f}")
# After retransmitting the newer one and seeing another NACK the order flips.
for name, hist in [("older packet, (1, 1, 2)", (1, 1, 2)), ("newer packet, (2, 0, 2)", (2, 0, 2))]:
    print(f"  {name}: {posterior_failure_probability(hist, eps, p, p):.5f}")
