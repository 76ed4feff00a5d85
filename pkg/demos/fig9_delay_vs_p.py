"""
Average delay in RTTs
=====================

T is the number of RTTs a packet holds the stop-and-wait process.  Repeating
the feedback L times multiplies it by L, waiting for L ACKs adds at least
L - 1 RTTs, while BCF spreads the L reports over later packets and keeps T
close to RegSaw.
"""
import numpy as np

from feedback_arq.cli import SweepSpec, parse_scheme, read_csv, run_sweep

from _common import OUT, n_packets, table

N = n_packets(10**6)
tokens = ["regsaw", "lrep:2", "lrep:4", "lack:2", "lack:4", "retxlack:2", "retxlack:4", "bcf:2", "bcf:4"]
schemes = [parse_scheme(t, M=4, L=1, policy="newest", q0_cap=None, alpha=None, tti=1.0, rtt=1.0) for t in tokens]
grid = [(float(p), float(p)) for p in np.geomspace(1e-3, 1e-1, 5)]
spec = SweepSpec(schemes=schemes, p_grid=grid, eps=0.1, g=1.2, M=4, n_packets=N, seed=1, mode="montecarlo",
                 out=str(OUT / "fig9_delay.csv"))
_, rows = read_csv(run_sweep(spec, stdout=open("/dev/null", "w")))
print(f"wrote {spec.out}\n")

t = {(r["scheme"], r["p0"]): r["t_bar"] for r in rows}
n = {(r["scheme"], r["p0"]): r["n_bar"] for r in rows}
labels = [c.label for c in schemes]
print("T-bar (RTTs)")
table(["p"] + labels, [[f"{p:.1e}"] + [f"{t[(l, p)]:.3f}" for l in labels] for p, _ in grid])
print("\nN-bar (transmissions per packet)")
table(["p"] + labels, [[f"{p:.1e}"] + [f"{n[(l, p)]:.3f}" for l in labels] for p, _ in grid])
