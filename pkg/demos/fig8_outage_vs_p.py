"""
Outage at M = 4, with and without combining gain
================================================

RegSaw with ARQ (g = 1) and HARQ (g = 1.2) has floors at 1e-4 and 4.285e-6.
Diversity on the feedback path pushes the curves down to those floors; BCF
has no closed form, so it is simulated.
"""
import warnings

import numpy as np

from feedback_arq.cli import SweepSpec, parse_scheme, read_csv, run_sweep

from _common import OUT, n_packets, table

N = n_packets(10**6)
warnings.simplefilter("ignore", RuntimeWarning)
grid = [(float(p), float(p)) for p in np.geomspace(1e-3, 1e-1, 5)]

for g in (1.0, 1.2):
    tokens = ["regsaw", "lrep:2", "lack:2", "lack:4", "retxlack:2", "asym:cap=1e-4", "blind", "bcf:2", "bcf:4"]
    schemes = [parse_scheme(t, M=4, L=1, policy="newest", q0_cap=None, alpha=None, tti=1.0, rtt=1.0) for t in tokens]
    out = OUT / f"fig8_outage_g{g}.csv"
    spec = SweepSpec(schemes=schemes, p_grid=grid, eps=0.1, g=g, M=4, n_packets=N, seed=1, mode="both", out=str(out))
    _, rows = read_csv(run_sweep(spec, stdout=open("/dev/null", "w")))
    print(f"\ng = {g}  (wrote {out})")
    # closed form where it exists, simulation for BCF
    pick = {}
    for r in rows:
        if r["p_out"] is None:
            continue
        if r["mode"] == "analytic" or r["scheme"].startswith("bcf"):
            pick[(r["scheme"], r["p0"])] = r["p_out"]
    labels = [c.label for c in schemes]
    table(["p"] + labels, [[f"{p:.1e}"] + [f"{pick[(l, p)]:.2e}" for l in labels] for p, _ in grid])
