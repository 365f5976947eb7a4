"""Command-line entry point.

Exit codes: 0 success, 1 infeasible or budget exhausted, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .baseline import run_baseline
from .design import DEFAULT_BUDGET, DEFAULT_EPSILON, VARIANTS, DesignProblem, asymptotic_scale, optimize
from .fourier import sft_demo
from .ilp import export_ilp
from .matrix import (
    BoundVacuousError,
    ConstructionError,
    FeasibilityError,
    ModulusSet,
    bounds_report,
    build_matrix,
    disjunct_check,
    expander_check,
    fourier_column_sparsity,
    gershgorin_rip_verify,
    write_dense_csv,
)
from .recovery import make_rng, measure

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2

SWEEP_COLUMNS = ["N", "k", "epsilon", "variant", "alpha", "m", "fourier_samples", "status"]


class UsageError(Exception):
    pass


def _dump(obj, out) -> None:
    out.write(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _moduli(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--moduli expects comma-separated integers, got {text!r}")


def _problem(args) -> DesignProblem:
    if args.D is not None:
        return DesignProblem(args.n, args.D, args.variant, args.alpha)
    if args.k is None:
        raise UsageError("give --k (with --eps) or --D")
    return DesignProblem.from_k_eps(args.n, args.k, args.eps, args.variant, args.alpha)


# ---------------------------------------------------------------- design


def cmd_design(args, out) -> int:
    problem = _problem(args)
    sol = optimize(problem, budget=args.budget)
    d = sol.as_dict(timing=not args.no_timing)
    if sol.status == "optimal":
        d["asymptotic_scale"] = asymptotic_scale(problem.N, problem.D)
    if args.json:
        with open(args.json, "w") as fh:
            _dump(d, fh)
    _dump(d, out)
    return EXIT_OK if sol.status == "optimal" else EXIT_INFEASIBLE


def cmd_export_ilp(args, out) -> int:
    problem = _problem(args)
    if problem.alpha is None:
        raise UsageError("export-ilp needs --alpha")
    exp = export_ilp(problem, problem.alpha, B=args.B)
    if args.out:
        exp.write(args.out)
        _dump(exp.manifest, out)
    else:
        out.write(exp.text)
    if args.manifest:
        with open(args.manifest, "w") as fh:
            _dump(exp.manifest, fh)
    return EXIT_OK


# ---------------------------------------------------------------- matrix


def cmd_matrix(args, out) -> int:
    ms = ModulusSet(_moduli(args.moduli), args.n)
    M = build_matrix(ms)
    rep = bounds_report(M, args.k, mu=None)
    report = {
        "s": list(ms.s),
        "N": ms.N,
        "alpha_window": ms.alpha,
        "m": M.m,
        "N_tilde": ms.N_tilde,
        "bounds": rep.as_dict(),
    }
    predicted, verified = fourier_column_sparsity(M)
    report["fourier_columns"] = {"predicted": predicted, "verified": verified if verified is not None else "skipped"}
    a = rep.alpha_actual
    checks = {}
    for name, fn in (
        ("disjunct", lambda: disjunct_check(M, (M.K - 1) // a) if a else "skipped"),
        ("expander", lambda: expander_check(M, args.k)),
        ("rip_gershgorin", lambda: gershgorin_rip_verify(M, args.k)),
    ):
        try:
            checks[name] = fn()
        except FeasibilityError:
            checks[name] = "skipped"
        except BoundVacuousError as exc:
            checks[name] = f"vacuous: {exc}"
    report["checks"] = {k: ("indeterminate" if v is None else v) for k, v in checks.items()}
    if args.csv:
        write_dense_csv(M, args.csv, transform=args.transform)
    _dump(report, out)
    return EXIT_OK


# ---------------------------------------------------------------- recovery


def read_signal_csv(path: str, N: int) -> np.ndarray:
    """Rows ``index,re,im``; an optional header line is skipped."""
    x = np.zeros(N, dtype=complex)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read signal file: {exc}")
    for lineno, row in enumerate(rows, start=1):
        if not row or not "".join(row).strip():
            continue
        if lineno == 1 and row[0].strip().lower() == "index":
            continue
        if len(row) != 3:
            raise UsageError(f"{path}:{lineno}: expected index,re,im")
        try:
            n, re, im = int(row[0]), float(row[1]), float(row[2])
        except ValueError:
            raise UsageError(f"{path}:{lineno}: cannot parse {row!r}")
        if not 0 <= n < N:
            raise UsageError(f"{path}:{lineno}: index {n} outside [0, {N})")
        x[n] += complex(re, im)
    return x


def synthetic_signal(N: int, spikes: str, noise: float, seed: int) -> np.ndarray:
    x = np.zeros(N, dtype=complex)
    for item in filter(None, (spikes or "").split(",")):
        try:
            idx, val = item.split(":")
            x[int(idx)] += complex(val.replace(" ", ""))
        except (ValueError, IndexError):
            raise UsageError(f"bad spike {item!r}; use index:value, e.g. 5:1+2j")
    if noise > 0:
        rng = make_rng(seed)
        x += noise * (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / math.sqrt(2)
    return x


def cmd_recover(args, out) -> int:
    ms = ModulusSet(_moduli(args.moduli), args.n)
    if args.signal:
        x = read_signal_csv(args.signal, ms.N)
    else:
        x = synthetic_signal(ms.N, args.spikes, args.noise, args.seed)
    M = build_matrix(ms)
    if args.measurements:
        measure(M, x).save(args.measurements)
    res = sft_demo(x, args.k, ms, epsilon=args.eps_recover, matrix=M)
    d = res.approximation.as_dict()
    d["report"] = res.report()
    _dump(d, out)
    return EXIT_OK


# ---------------------------------------------------------------- baseline


def cmd_baseline(args, out) -> int:
    res = run_baseline(args.n, args.k, args.eps, args.trials, args.seed)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(res.to_csv())
    _dump(res.summary(), out)
    return EXIT_OK


# ---------------------------------------------------------------- experiment


@dataclass
class ExperimentConfig:
    N: list
    k: list
    epsilon: float = DEFAULT_EPSILON
    variants: list = field(default_factory=lambda: list(VARIANTS))
    trials: int = 100
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    output_dir: str = "results"
    baseline: bool = False
    svg: bool = False

    KEYS = ("N", "k", "epsilon", "variants", "trials", "seed", "budget", "output_dir", "baseline", "svg")

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise UsageError("config must be a mapping")
        unknown = sorted(set(raw) - set(cls.KEYS))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        if "N" not in raw or "k" not in raw:
            raise UsageError("config needs N and k")
        N = raw["N"] if isinstance(raw["N"], list) else [raw["N"]]
        k = raw["k"]
        if isinstance(k, dict):
            extra = set(k) - {"start", "stop"}
            if extra:
                raise UsageError(f"unknown keys in k range: {', '.join(sorted(extra))}")
            k = list(range(int(k["start"]), int(k["stop"]) + 1))
        elif not isinstance(k, list):
            k = [k]
        variants = raw.get("variants", list(VARIANTS))
        bad = [v for v in variants if v not in VARIANTS]
        if bad:
            raise UsageError(f"unknown variants: {bad}")
        kw = {key: raw[key] for key in cls.KEYS if key in raw and key not in ("N", "k", "variants")}
        return cls(N=[int(n) for n in N], k=[int(v) for v in k], variants=list(variants), **kw)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config: {exc}")
        return cls.from_mapping(raw or {})


def run_experiment(cfg: ExperimentConfig, with_baseline: bool = False):
    """Rows for the sweep CSV plus per-cell wall times kept out of the data file."""
    rows, timings = [], []
    for N in cfg.N:
        for variant in cfg.variants:
            for k in cfg.k:
                sol = optimize(DesignProblem.from_k_eps(N, k, cfg.epsilon, variant), budget=cfg.budget)
                rows.append([N, k, repr(cfg.epsilon), variant, sol.alpha, sol.m, sol.fourier_samples, sol.status])
                timings.append([N, k, variant, round(sol.wall_ms, 3)])
        if with_baseline or cfg.baseline:
            for k in cfg.k:
                res = run_baseline(N, k, cfg.epsilon, cfg.trials, cfg.seed)
                m = res.min_m_stop
                rows.append([N, k, repr(cfg.epsilon), "random", "", m, m, "sampled"])
    return rows, timings


def write_plot_data(rows, path: str) -> None:
    """gnuplot data: one index block per (N, variant) with columns k samples."""
    blocks = {}
    for N, k, _, variant, _, _, fs, status in rows:
        blocks.setdefault((N, variant), []).append((k, fs if status in ("optimal", "sampled") else None))
    with open(path, "w") as fh:
        for (N, variant), pts in blocks.items():
            fh.write(f"# N={N} variant={variant}\n# k samples\n")
            for k, fs in pts:
                fh.write(f"{k} {fs if fs is not None else 'NaN'}\n")
            fh.write("\n\n")


def write_svg(rows, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for N, k, _, variant, _, _, fs, status in rows:
        if status in ("optimal", "sampled"):
            series.setdefault(f"{variant} (N={N})", []).append((k, fs))
    for label, pts in series.items():
        ks, fs = zip(*pts)
        ax.plot(ks, fs, marker="o", linestyle="none", label=label)
    ax.set_xlabel("k")
    ax.set_ylabel("Fourier samples m - K + 1")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_experiment(args, out) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.out_dir:
        cfg.output_dir = args.out_dir
    if args.seed is not None:
        cfg.seed = args.seed
    os.makedirs(cfg.output_dir, exist_ok=True)
    rows, timings = run_experiment(cfg, with_baseline=args.baseline)
    with open(os.path.join(cfg.output_dir, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        w.writerows(rows)
    with open(os.path.join(cfg.output_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "k", "variant", "wall_ms"])
        w.writerows(timings)
    write_plot_data(rows, os.path.join(cfg.output_dir, "plot.dat"))
    if cfg.svg or args.svg:
        write_svg(rows, os.path.join(cfg.output_dir, "plot.svg"))
    bad = [r for r in rows if r[-1] not in ("optimal", "sampled")]
    _dump({"rows": len(rows), "non_optimal_cells": len(bad), "output_dir": cfg.output_dir}, out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="picketcs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def design_flags(sp):
        sp.add_argument("--n", type=int, required=True, help="signal bandwidth N")
        sp.add_argument("--k", type=int, help="sparsity; D = (k-1)/eps")
        sp.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
        sp.add_argument("--D", type=float, help="ratio K/alpha directly (overrides --k)")
        sp.add_argument("--variant", choices=VARIANTS, default="relprime")
        sp.add_argument("--alpha", type=int)

    sp = sub.add_parser("design", help="minimal-sampling design search")
    design_flags(sp)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="node budget")
    sp.add_argument("--json", help="also write the solution JSON here")
    sp.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("export-ilp", help="write the integer program in LP format")
    design_flags(sp)
    sp.add_argument("--B", type=int, help="override the value range bound")
    sp.add_argument("--out", help="LP file (default: stdout)")
    sp.add_argument("--manifest", help="write the count manifest JSON here")
    sp.set_defaults(func=cmd_export_ilp)

    sp = sub.add_parser("matrix", help="build a matrix and run its verifiers")
    sp.add_argument("--moduli", required=True, help="comma-separated moduli, e.g. 2,3,5")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--csv", help="dense CSV export path (small instances)")
    sp.add_argument("--transform", action="store_true", help="export M F instead of M")
    sp.set_defaults(func=cmd_matrix)

    sp = sub.add_parser("recover", help="measure a spectrum and run sparse recovery")
    sp.add_argument("--moduli", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--signal", help="CSV with index,re,im rows")
    sp.add_argument("--spikes", default="", help="synthetic spikes, e.g. 5:1+2j,9:-0.5")
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--eps-recover", type=float, default=1.0, help="accuracy parameter epsilon")
    sp.add_argument("--measurements", help="write the binary measurement vector here")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("baseline", help="random inverse-DFT coherence baseline")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("experiment", help="run a sweep from a YAML config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir")
    sp.add_argument("--baseline", action="store_true", help="add random baseline rows")
    sp.add_argument("--seed", type=int, help="override the config seed")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[list] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (UsageError, ConstructionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
