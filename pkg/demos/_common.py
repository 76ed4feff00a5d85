# shared bits for the demo scripts
import sys
from pathlib import Path

OUT = Path(__file__).parent / "out"


def n_packets(default):
    # `python demos/x.py 100000` runs with fewer packets
    return int(sys.argv[1]) if len(sys.argv) > 1 else default


def table(header, rows):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)))
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)))
