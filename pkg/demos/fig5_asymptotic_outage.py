"""
Outage with unlimited retransmissions
=====================================

With M large enough the residual BLEP eps**M vanishes and what is left is
the damage done by false ACKs.  Here we tabulate the closed forms over
p = p0 = p1 for eps = 0.1, g = 1, at M = 40, next to the M -> infinity column.
"""
import warnings

import numpy as np

from feedback_arq import BlepModel, FeedbackChannelParams
from feedback_arq.analytic import UnsupportedForm, outage_asymptotic_bound
from feedback_arq.cli import SweepSpec, parse_scheme, run_sweep, read_csv

from _common import OUT, table

M = 40
tokens = ["regsaw", "lrep:2", "lrep:4", "lack:2", "lack:4", "retxlack:2", "retxlack:4", "asym:cap=1e-4", "blind"]
schemes = [parse_scheme(t, M=M, L=1, policy="newest", q0_cap=None, alpha=None, tti=1.0, rtt=1.0) for t in tokens]
grid = [(float(p), float(p)) for p in np.geomspace(1e-4, 0.3, 9)]

# The asym scheme needs thresholds past the ACK point at large p; the library warns about it.
warnings.simplefilter("ignore", RuntimeWarning)

spec = SweepSpec(schemes=schemes, p_grid=grid, eps=0.1, g=1.0, M=M, out=str(OUT / "fig5_outage_large_M.csv"))
_, rows = read_csv(run_sweep(spec, stdout=open("/dev/null", "w")))
print(f"wrote {spec.out}\n")

# Pivot: one column per scheme
by = {}
for r in rows:
    by.setdefault(r["p0"], {})[r["scheme"]] = r["p_out"]
labels = [c.label for c in schemes]
table(["p"] + labels, [[f"{p:.1e}"] + [f"{by[p][l]:.2e}" for l in labels] for p in sorted(by)])

# The M -> infinity column: upper bounds for the single-report schemes,
# approximations for the multi-ACK ones.
print("\nM -> infinity column at p = 1e-2:")
ch = FeedbackChannelParams(1e-2, 1e-2)
for c in schemes:
    try:
        v = outage_asymptotic_bound(c, BlepModel(0.1, 1.0, M), ch)
    except UnsupportedForm as e:
        v = str(e)
    print(f"  {c.label:>18}: {v if isinstance(v, str) else f'{v:.3e}'}")
