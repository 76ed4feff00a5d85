"""Command-line front end: ``point``, ``sweep``, ``latency`` and ``compare``.

Every subcommand writes CSV.  The first line is a ``#`` comment carrying the
format name and version, the second is the column header.  Missing values
(closed forms that do not exist, CI columns on analytic rows) are ``NA``.
When ``--out`` names a file, a sibling ``<out>.meta.json`` records the
resolved configuration and tool version.  No timestamps are written anywhere,
so identical inputs give identical bytes.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analytic import UnsupportedForm, analytic_point, latency_ccdf, latency_masses, latency_support
from .blep import BlepModel
from .channel import FeedbackChannelParams
from .montecarlo import compare_to_analytic, estimate
from .schemes.config import SINGLE_ACK_KINDS, ConfigError, SchemeConfig, SchemeKind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPARE = 3

NA = "NA"
SWEEP_FORMAT = "feedback_arq-sweep/1"
LATENCY_FORMAT = "feedback_arq-latency/1"
COMPARE_FORMAT = "feedback_arq-compare/1"

# column name -> python type; NA allowed wherever a value can be missing
SWEEP_COLUMNS = {
    "scheme": str,
    "L": int,
    "M": int,
    "eps": float,
    "g": float,
    "p0": float,
    "p1": float,
    "mode": str,
    "p_out": float,
    "p_out_ci_lo": float,
    "p_out_ci_hi": float,
    "n_bar": float,
    "t_bar": float,
    "n_packets": int,
    "seed": int,
}
LATENCY_COLUMNS = {"scheme": str, "L": int, "M": int, "mode": str, "k": int, "t_k": float, "ccdf": float}
COMPARE_COLUMNS = {
    "scheme": str,
    "L": int,
    "p0": float,
    "p1": float,
    "metric": str,
    "analytic": float,
    "montecarlo": float,
    "z": float,
    "pass": str,
}

DEFAULTS = {
    "scheme": ["regsaw"],
    "L": 1,
    "M": 4,
    "eps": 0.1,
    "g": 1.0,
    "p": None,
    "p_range": None,
    "p0": None,
    "p1": None,
    "q0_cap": None,
    "alpha": None,
    "retx_policy": "newest",
    "tti": 1.0,
    "rtt": 1.0,
    "n_packets": 100_000,
    "seed": 0,
    "workers": 1,
    "mode": "analytic",
    "out": None,
    "threshold": 3.0,
}


@dataclass
class SweepSpec:
    schemes: list
    p_grid: list  # (p0, p1) pairs
    eps: float
    g: float
    M: int
    n_packets: int = 100_000
    seed: int = 0
    out: str | None = None
    mode: str = "analytic"
    workers: int = 1
    threshold: float = 3.0
    extra: dict = field(default_factory=dict)

    @property
    def blep(self) -> BlepModel:
        return BlepModel(self.eps, self.g, self.M)

    def describe(self) -> dict:
        return {
            "schemes": [_config_dict(c) for c in self.schemes],
            "p_grid": [list(pp) for pp in self.p_grid],
            "eps": self.eps,
            "g": self.g,
            "M": self.M,
            "n_packets": self.n_packets,
            "seed": self.seed,
            "mode": self.mode,
            "workers_do_not_affect_output": True,
        }


def _config_dict(c: SchemeConfig) -> dict:
    d = asdict(c)
    d["kind"] = c.kind.value
    d["retx_policy"] = c.retx_policy.value
    d["label"] = c.label
    return d


# ---------------------------------------------------------------------------
# parsing


def parse_scheme(token: str, *, M: int, L: int, policy: str, q0_cap, alpha, tti: float, rtt: float) -> SchemeConfig:
    """``NAME[:L][:newest|posterior][:cap=X][:alpha=X]`` -> SchemeConfig.

    Global ``--L``/``--q0-cap``/``--alpha`` fill in whatever the token leaves
    open, and only where the scheme accepts them.
    """
    parts = token.strip().split(":")
    try:
        kind = SchemeKind(parts[0].lower())
    except ValueError:
        raise ConfigError(f"unknown scheme {parts[0]!r}; choose from {[k.value for k in SchemeKind]}") from None
    my_L, my_policy, my_cap, my_alpha = None, None, None, None
    for part in parts[1:]:
        if part.isdigit():
            my_L = int(part)
        elif part in ("newest", "posterior"):
            my_policy = part
        elif part.startswith("cap="):
            my_cap = _float(part[4:], "cap")
        elif part.startswith("alpha="):
            my_alpha = _float(part[6:], "alpha")
        else:
            raise ConfigError(f"cannot parse {part!r} in scheme {token!r}")
    if my_L is None:
        my_L = 1 if kind in SINGLE_ACK_KINDS else L
    if kind is SchemeKind.ASYM_SAW and my_cap is None and my_alpha is None:
        my_cap, my_alpha = q0_cap, alpha
    return SchemeConfig(
        kind,
        M=M,
        L=my_L,
        tti=tti,
        rtt=rtt,
        retx_policy=my_policy or policy,
        q0_cap=my_cap,
        alpha=my_alpha,
    )


def _float(s, name) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {s!r}") from None


def _listify(v):
    if v is None:
        return None
    return list(v) if isinstance(v, (list, tuple)) else [v]


def p_grid(opts: dict) -> list[tuple[float, float]]:
    p, rng, p0, p1 = opts["p"], opts["p_range"], opts["p0"], opts["p1"]
    if (p0 is None) != (p1 is None):
        raise ConfigError("--p0 and --p1 must be given together")
    given = sum(x is not None for x in (p, rng, p0))
    if given > 1:
        raise ConfigError("give only one of --p, --p-range, or --p0/--p1")
    if p0 is not None:
        p0, p1 = _listify(p0), _listify(p1)
        if len(p0) != len(p1):
            raise ConfigError("--p0 and --p1 need the same number of values")
        pairs = [(_float(a, "p0"), _float(b, "p1")) for a, b in zip(p0, p1)]
    elif rng is not None:
        rng = _listify(rng)
        if len(rng) != 3:
            raise ConfigError("--p-range takes LO HI N")
        lo, hi, n = _float(rng[0], "p-range"), _float(rng[1], "p-range"), int(rng[2])
        if not 0 < lo <= hi or n < 1:
            raise ConfigError("--p-range needs 0 < LO <= HI and N >= 1")
        grid = np.geomspace(lo, hi, n) if n > 1 else np.array([lo])
        pairs = [(float(v), float(v)) for v in grid]
    else:
        values = _listify(p) if p is not None else [0.0]
        pairs = [(_float(v, "p"), _float(v, "p")) for v in values]
    for a, b in pairs:
        FeedbackChannelParams(a, b)
    return pairs


def _to_config_error(fn):
    def wrapped(*args, **kw):
        try:
            return fn(*args, **kw)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    return wrapped


@_to_config_error
def resolve(ns: argparse.Namespace) -> SweepSpec:
    """Merge defaults, command-line flags and the config file (file wins)."""
    opts = dict(DEFAULTS)
    flags = {k: v for k, v in vars(ns).items() if k in DEFAULTS and v is not None}
    opts.update(flags)
    if getattr(ns, "config", None):
        path = Path(ns.config)
        try:
            loaded = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        loaded = {k.replace("-", "_"): v for k, v in loaded.items()}
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        for k, v in loaded.items():
            if k in flags and flags[k] != v:
                warnings.warn(f"config file overrides --{k.replace('_', '-')}: {flags[k]!r} -> {v!r}", stacklevel=2)
        opts.update(loaded)
    M = int(opts["M"])
    schemes = [
        parse_scheme(
            str(tok),
            M=M,
            L=int(opts["L"]),
            policy=str(opts["retx_policy"]),
            q0_cap=opts["q0_cap"],
            alpha=opts["alpha"],
            tti=float(opts["tti"]),
            rtt=float(opts["rtt"]),
        )
        for tok in _listify(opts["scheme"])
    ]
    if opts["mode"] not in ("analytic", "montecarlo", "both"):
        raise ConfigError(f"mode must be analytic, montecarlo or both, got {opts['mode']!r}")
    spec = SweepSpec(
        schemes=schemes,
        p_grid=p_grid(opts),
        eps=float(opts["eps"]),
        g=float(opts["g"]),
        M=M,
        n_packets=int(opts["n_packets"]),
        seed=int(opts["seed"]),
        out=opts["out"],
        mode=opts["mode"],
        workers=int(opts["workers"]),
        threshold=float(opts["threshold"]),
    )
    spec.blep  # validates eps, g, M
    if spec.n_packets < 1 or spec.workers < 1 or spec.seed < 0:
        raise ConfigError("n-packets and workers must be >= 1, seed >= 0")
    return spec


# ---------------------------------------------------------------------------
# formatting


def fmt(v) -> str:
    if v is None:
        return NA
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return NA if math.isnan(v) else repr(v)
    return str(v)


def write_csv(fmt_name: str, columns: dict, rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# {fmt_name}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def read_csv(text: str, columns: dict | None = None) -> tuple[str, list[dict]]:
    """Inverse of :func:`write_csv`: typed rows with ``None`` for NA."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError("missing versioned header line")
    fmt_name = lines[0][2:]
    header = lines[1].split(",")
    if columns is None:
        columns = {SWEEP_FORMAT: SWEEP_COLUMNS, LATENCY_FORMAT: LATENCY_COLUMNS, COMPARE_FORMAT: COMPARE_COLUMNS}[fmt_name]
    if header != list(columns):
        raise ValueError(f"unexpected columns {header}")
    rows = []
    for line in lines[2:]:
        cells = line.split(",")
        rows.append({c: None if s == NA else columns[c](s) for c, s in zip(header, cells)})
    return fmt_name, rows


def _emit(text: str, spec: SweepSpec, kind: str, stdout) -> None:
    if spec.out is None:
        stdout.write(text)
        return
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(text.encode())
    meta = {
        "format": kind,
        "tool": "feedback_arq",
        "tool_version": __version__,
        "numpy_version": np.__version__,
        "spec": spec.describe(),
        "columns": {
            SWEEP_FORMAT: list(SWEEP_COLUMNS),
            LATENCY_FORMAT: list(LATENCY_COLUMNS),
            COMPARE_FORMAT: list(COMPARE_COLUMNS),
        }[kind],
        "na_marker": NA,
        "notes": [
            "t_bar is the mean number of RTTs a packet holds the process",
            "bcf montecarlo excludes the first L packets of each block (pipeline fill) "
            "and runs L extra packets so the last L offered packets are evicted",
            "montecarlo blocks are keyed by (seed, block index); every scheme and grid point "
            "reuses the same seed (common random numbers)",
        ],
    }
    Path(str(out) + ".meta.json").write_bytes((json.dumps(meta, indent=2, sort_keys=True) + "\n").encode())


# ---------------------------------------------------------------------------
# subcommands


def sweep_rows(spec: SweepSpec) -> list[dict]:
    blep = spec.blep
    rows = []
    for config in spec.schemes:
        for p0, p1 in spec.p_grid:
            channel = FeedbackChannelParams(p0, p1)
            base = dict(scheme=config.label, L=config.L, M=config.M, eps=spec.eps, g=spec.g, p0=p0, p1=p1)
            if spec.mode in ("analytic", "both"):
                try:
                    a = analytic_point(config, blep, channel)
                    vals = dict(p_out=a.p_out, n_bar=a.n_bar, t_bar=a.t_bar)
                except UnsupportedForm:
                    vals = {}
                rows.append({**base, "mode": "analytic", **vals})
            if spec.mode in ("montecarlo", "both"):
                m = estimate(config, blep, channel, spec.n_packets, spec.seed, spec.workers)
                rows.append(
                    {
                        **base,
                        "mode": "montecarlo",
                        "p_out": m.p_out_hat,
                        "p_out_ci_lo": m.p_out_ci[0],
                        "p_out_ci_hi": m.p_out_ci[1],
                        "n_bar": m.n_bar_hat,
                        "t_bar": m.t_bar_hat,
                        "n_packets": m.n_packets,
                        "seed": spec.seed,
                    }
                )
    return rows


def run_sweep(spec: SweepSpec, stdout=None) -> str:
    text = write_csv(SWEEP_FORMAT, SWEEP_COLUMNS, sweep_rows(spec))
    _emit(text, spec, SWEEP_FORMAT, stdout or sys.stdout)
    return text


def latency_rows(spec: SweepSpec) -> list[dict]:
    blep = spec.blep
    rows = []
    for config in spec.schemes:
        for p0, p1 in spec.p_grid:
            channel = FeedbackChannelParams(p0, p1)
            curves = []
            if spec.mode in ("analytic", "both"):
                if config.kind is SchemeKind.BCF_SAW:
                    if spec.mode == "analytic":
                        raise ConfigError("bcf latency needs --mode montecarlo")
                else:
                    curves.append(("analytic", latency_masses(config, blep, channel)))
            if spec.mode in ("montecarlo", "both"):
                m = estimate(config, blep, channel, spec.n_packets, spec.seed, spec.workers)
                masses = m.latency_masses
                if config.kind is not SchemeKind.BCF_SAW:
                    top = latency_support(config)[-1]
                    masses = np.pad(masses, (0, max(0, top + 1 - masses.size)))
                curves.append(("montecarlo", masses))
            for mode, masses in curves:
                for k, c in enumerate(latency_ccdf(masses)):
                    rows.append(
                        dict(scheme=config.label, L=config.L, M=config.M, mode=mode, k=k, t_k=config.latency(k), ccdf=max(float(c), 0.0))
                    )
    return rows


def emit_latency_ccdf(spec: SweepSpec, stdout=None) -> str:
    text = write_csv(LATENCY_FORMAT, LATENCY_COLUMNS, latency_rows(spec))
    _emit(text, spec, LATENCY_FORMAT, stdout or sys.stdout)
    return text


def compare(spec: SweepSpec, stdout=None) -> tuple[str, bool]:
    """Closed form vs simulation at every grid point; BCF rows carry NA."""
    blep = spec.blep
    rows, ok = [], True
    for config in spec.schemes:
        for p0, p1 in spec.p_grid:
            channel = FeedbackChannelParams(p0, p1)
            m = estimate(config, blep, channel, spec.n_packets, spec.seed, spec.workers)
            base = dict(scheme=config.label, L=config.L, p0=p0, p1=p1)
            sim = {"p_out": m.p_out_hat, "n_bar": m.n_bar_hat, "t_bar": m.t_bar_hat}
            if config.kind is SchemeKind.BCF_SAW:
                rows += [{**base, "metric": k, "montecarlo": v, "pass": NA} for k, v in sim.items()]
                continue
            a = analytic_point(config, blep, channel)
            report = compare_to_analytic(m, a, spec.threshold)
            ok &= report.ok
            for k, v in sim.items():
                rows.append({**base, "metric": k, "analytic": getattr(a, k), "montecarlo": v, "z": report.z[k], "pass": abs(report.z[k]) <= spec.threshold})
    text = write_csv(COMPARE_FORMAT, COMPARE_COLUMNS, rows)
    _emit(text, spec, COMPARE_FORMAT, stdout or sys.stdout)
    return text, ok


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    # defaults stay None so we can tell which flags were actually given
    a("--scheme", action="append", help="NAME[:L][:newest|posterior][:cap=X][:alpha=X]; repeatable")
    a("--L", type=int, help="feedback diversity order for schemes that take one")
    a("--M", type=int, help="max transmission attempts (default 4)")
    a("--eps", type=float, help="first-attempt BLEP (default 0.1)")
    a("--g", type=float, help="combining gain (default 1)")
    a("--p", type=float, nargs="+", help="symmetric feedback error rate(s)")
    a("--p-range", nargs=3, metavar=("LO", "HI", "N"), help="log-spaced symmetric grid")
    a("--p0", type=float, nargs="+", help="false-ACK rate(s), paired with --p1")
    a("--p1", type=float, nargs="+", help="false-NACK rate(s), paired with --p0")
    a("--q0-cap", type=float, help="asym: false-ACK target cap")
    a("--alpha", type=float, help="asym: explicit threshold offset")
    a("--retx-policy", choices=["newest", "posterior"], help="bcf retransmission order")
    a("--tti", type=float)
    a("--rtt", type=float)
    a("--n-packets", type=int)
    a("--seed", type=int)
    a("--workers", type=int)
    a("--mode", choices=["analytic", "montecarlo", "both"])
    a("--threshold", type=float, help="compare: max |z| (default 3)")
    a("--out", help="output CSV path (stdout if omitted)")
    a("--config", help="JSON or YAML file with the same keys; wins over flags")

    parser = argparse.ArgumentParser(prog="feedback-arq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("point", parents=[common], help="evaluate one point per scheme")
    sub.add_parser("sweep", parents=[common], help="evaluate schemes over a p grid")
    sub.add_parser("latency", parents=[common], help="latency CCDF per scheme")
    sub.add_parser("compare", parents=[common], help="closed form vs simulation z-scores")
    return parser


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        spec = resolve(ns)
        if ns.command == "point" and len(spec.p_grid) != 1:
            raise ConfigError("point takes exactly one p value or (p0, p1) pair")
        if ns.command in ("point", "sweep"):
            run_sweep(spec, stdout)
        elif ns.command == "latency":
            emit_latency_ccdf(spec, stdout)
        else:
            _, ok = compare(spec, stdout)
            if not ok:
                print("compare: some |z| exceed the threshold", file=sys.stderr)
                return EXIT_COMPARE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
