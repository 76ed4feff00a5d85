"""
Latency CCDF at p = 2e-2, g = 1.2
=================================

P(tau > t_k) with t_k = TTI + k * RTT.  Each curve flattens out at its
outage probability, since never-decoded packets never arrive.
"""
from feedback_arq.cli import SweepSpec, emit_latency_ccdf, parse_scheme, read_csv

from _common import OUT, n_packets, table

N = n_packets(10**6)
tokens = ["regsaw", "lack:4", "retxlack:4", "lrep:2", "bcf:4"]
schemes = [parse_scheme(t, M=4, L=1, policy="newest", q0_cap=None, alpha=None, tti=1.0, rtt=1.0) for t in tokens]
spec = SweepSpec(schemes=schemes, p_grid=[(2e-2, 2e-2)], eps=0.1, g=1.2, M=4, n_packets=N, seed=3,
                 mode="montecarlo", out=str(OUT / "fig10_latency_ccdf.csv"))
_, rows = read_csv(emit_latency_ccdf(spec, stdout=open("/dev/null", "w")))
print(f"wrote {spec.out}\n")

curves = {}
for r in rows:
    curves.setdefault(r["scheme"], {})[r["k"]] = r["ccdf"]
kmax = max(max(c) for c in curves.values())
labels = [c.label for c in schemes]
table(["k"] + labels, [[k] + [f"{curves[l].get(k, curves[l][max(curves[l])]):.2e}" for l in labels] for k in range(kmax + 1)])
