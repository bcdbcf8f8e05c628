"""``glauber-lab`` command line: gen, sample, diagnose, verify, experiment.

Exit codes: 0 success, 2 bad parameters or input, 3 size cap exceeded,
4 verification failure.  Every CSV or report starts with ``#`` metadata
lines (command line, seeds, RNG algorithm, version).  ``gen`` keeps the
edge-list file itself strict and writes its metadata to ``<out>.meta``.
"""

from __future__ import annotations

import argparse
import math
import os
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from glauber_lab import __version__
from glauber_lab.dynamics import (
    DIAGNOSTICS_HEADER,
    GAP_CAP,
    ChainDiagnostics,
    diagnose,
    diagnostics_csv_row,
    run_chain,
    time_series_csv,
)
from glauber_lab.errors import (
    ConvergenceError,
    FormatError,
    GlauberLabError,
    ParameterError,
    SizeCapError,
    TruncationError,
)
from glauber_lab.graphs import Graph, format_edge_list, generate_gnp, read_edge_list
from glauber_lab.models import HARDCORE, MATCHING, hardcore, monomer_dimer, parse_number
from glauber_lab.oracle import DEFAULT_SITE_CAP
from glauber_lab.rng import RNG_ALGORITHM

EXIT_OK, EXIT_PARAM, EXIT_CAP, EXIT_VERIFY = 0, 2, 3, 4
THREADS_ENV = "GLAUBER_LAB_THREADS"

# flag name -> (type, default); config files use the same keys
OPTIONS = {
    "n": (int, None),
    "d": (float, None),
    "lambda": (str, "1"),
    "seed": (int, 0),
    "seeds": (str, None),
    "steps": (int, 1000),
    "burnin": (int, 0),
    "thin": (int, 1),
    "model": (str, HARDCORE),
    "out": (str, None),
    "corpus": (str, "default"),
    "caps": (int, None),
    "trials": (int, 1000),
}


class UsageError(ParameterError):
    pass


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


def read_config(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys mirror the long flags."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS and key != "inject_literal_pinning":
            raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _resolve(args: argparse.Namespace, raw_keys: tuple = ()) -> dict:
    """Merge flags over config over defaults, converting types (except ``raw_keys``)."""
    config = read_config(args.config) if getattr(args, "config", None) else {}
    values = {}
    for key, (kind, default) in OPTIONS.items():
        flag = getattr(args, key.replace("-", "_"), None)
        raw = flag if flag is not None else config.get(key, default)
        if raw is None:
            values[key] = None
            continue
        try:
            values[key] = raw if key in raw_keys else kind(raw)
        except ValueError:
            raise UsageError(f"--{key}: cannot parse {raw!r}") from None
    values["config"] = config
    return values


def _parse_lambda(text: str):
    try:
        lam = parse_number(text)
    except ValueError:
        raise UsageError(f"--lambda: cannot parse {text!r}") from None
    if not lam > 0 or not math.isfinite(lam):
        raise UsageError(f"--lambda must be positive and finite, got {text}")
    return lam


def _parse_int_list(text: str, name: str) -> list[int]:
    """``"6..14"``, ``"1,2,5"`` or a mix such as ``"1..3,7"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = part.split("..")
                out += list(range(int(lo), int(hi) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"{name}: cannot parse {text!r}") from None
    if not out:
        raise UsageError(f"{name}: empty list")
    return out


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        k = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def metadata(argv: list[str], seeds, extra: dict | None = None) -> str:
    lines = [
        f"# glauber-lab {__version__}",
        f"# command: {shlex.join(['glauber-lab', *argv])}",
        f"# seeds: {' '.join(str(s) for s in seeds) if seeds else 'none'}",
        f"# rng: {RNG_ALGORITHM}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {value}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="ascii")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None


def _config_echo(values: dict) -> dict:
    return {"config": " ".join(f"{k}={v}" for k, v in sorted(values["config"].items()))} \
        if values["config"] else {}


# --------------------------------------------------------------------------
# Model construction
# --------------------------------------------------------------------------


def _graph_from(values: dict, path: str | None) -> tuple[Graph, str, str]:
    """Graph plus the ``d`` and ``seed`` columns used in diagnostics rows."""
    if path is not None:
        try:
            g = read_edge_list(path)
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None
        mean = 2 * g.m / g.n if g.n else 0.0
        return g, repr(mean), ""
    n, d = values["n"], values["d"]
    _check(n is not None and d is not None, "need a graph file or both --n and --d")
    _check(n >= 1, f"--n must be positive, got {n}")
    _check(0 <= d <= n, f"--d must lie in [0, n], got {d}")
    _check(values["seed"] >= 0, "--seed must be nonnegative")
    return generate_gnp(n, d, values["seed"]), repr(d), str(values["seed"])


def _model(g: Graph, kind: str, lam):
    _check(kind in (HARDCORE, MATCHING), f"--model must be hardcore or matching, got {kind!r}")
    return hardcore(g, lam) if kind == HARDCORE else monomer_dimer(g, lam)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_gen(args, argv) -> int:
    v = _resolve(args)
    _check(v["n"] is not None and v["d"] is not None, "gen needs --n and --d")
    _check(v["n"] >= 0, f"--n must be nonnegative, got {v['n']}")
    _check(v["seed"] >= 0, "--seed must be nonnegative")
    g = generate_gnp(v["n"], v["d"], v["seed"])
    text = format_edge_list(g)
    if v["out"] is None:
        sys.stdout.write(text)
        print(f"n={g.n} m={g.m} max_degree={g.max_degree}", file=sys.stderr)
        return EXIT_OK
    _emit(text, v["out"])
    meta = metadata(argv, [v["seed"]], {"n": v["n"], "d": v["d"], **_config_echo(v)})
    _emit(meta, v["out"] + ".meta")
    print(f"n={g.n} m={g.m} max_degree={g.max_degree}")
    return EXIT_OK


def cmd_sample(args, argv) -> int:
    v = _resolve(args)
    lam = _parse_lambda(v["lambda"])
    _check(v["steps"] >= 0, "--steps must be nonnegative")
    _check(v["burnin"] >= 0, "--burnin must be nonnegative")
    _check(v["thin"] >= 1, "--thin must be at least 1")
    g, _, _ = _graph_from(v, args.graph)
    m = _model(g, v["model"], lam)
    run = run_chain(m, v["steps"], burn_in=v["burnin"], thin=v["thin"], seed=v["seed"])
    extra = {"model": v["model"], "lambda": v["lambda"], "steps": v["steps"],
             "burnin": v["burnin"], "thin": v["thin"], **_config_echo(v)}
    _emit(metadata(argv, [v["seed"]], extra) + time_series_csv(run), v["out"])
    frac = float(run.occupation_fraction().mean()) if len(run.occupied) else float("nan")
    print(f"occupation_fraction={frac!r}", file=sys.stderr)
    return EXIT_OK


def diagnose_row(m, n: int, d: str, lam, seed: str, cap: int) -> tuple[str, ChainDiagnostics]:
    dg = diagnose(m, cap=cap)
    return diagnostics_csv_row(n, d, lam, seed, dg), dg


def cmd_diagnose(args, argv) -> int:
    v = _resolve(args)
    lam = _parse_lambda(v["lambda"])
    cap = v["caps"] if v["caps"] is not None else GAP_CAP
    _check(cap >= 1, "--caps must be positive")
    g, d, seed = _graph_from(v, args.graph)
    m = _model(g, v["model"], lam)
    if m.n_sites > DEFAULT_SITE_CAP:
        raise SizeCapError(f"{m.n_sites} sites exceed the enumeration cap {DEFAULT_SITE_CAP}")
    row, _ = diagnose_row(m, g.n, d, v["lambda"], seed, cap)
    seeds = [seed] if seed else []
    meta = metadata(argv, seeds, {"model": v["model"], **_config_echo(v)})
    _emit(meta + DIAGNOSTICS_HEADER + "\n" + row + "\n", v["out"])
    return EXIT_OK


def cmd_verify(args, argv) -> int:
    from glauber_lab.verify import CORPORA, run_suites

    v = _resolve(args)
    _check(v["corpus"] in CORPORA, f"--corpus must be one of {', '.join(CORPORA)}")
    _check(v["trials"] >= 1, "--trials must be positive")
    literal = args.inject_literal_pinning or v["config"].get("inject_literal_pinning") == "1"
    results = run_suites(v["corpus"], literal_pinning=literal, trials=v["trials"])
    extra = {"corpus": v["corpus"], "pin_rule": "literal" if literal else "edge-order",
             **_config_echo(v)}
    lines = ["suite,cases,failures,status"] + [r.line() for r in results]
    _emit(metadata(argv, [0], extra) + "\n".join(lines) + "\n", v["out"])
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


# --------------------------------------------------------------------------
# Scaling experiments
# --------------------------------------------------------------------------


@dataclass
class ExponentFit:
    exponent: float
    intercept: float
    r2: float
    points: int
    residual_std: float

    def describe(self) -> str:
        return (f"log(t_mix) = a + b log(n); b={self.exponent!r} a={self.intercept!r} "
                f"r2={self.r2!r} points={self.points} residual_std={self.residual_std!r}")


def fit_exponent(ns, tmix) -> ExponentFit:
    """Least-squares slope of ``log t_mix`` against ``log n``."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(tmix, dtype=float))
    if len(x) < 2 or np.ptp(x) == 0:
        raise ParameterError("need at least two distinct n values to fit an exponent")
    A = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(coef[1]), float(coef[0]), r2, len(x), float(resid.std()))


@dataclass
class Experiment:
    kind: str
    ns: list
    d: float
    lam: object
    lam_text: str
    seeds: list
    cap: int
    rows: list = field(default_factory=list)
    fit: ExponentFit | None = None


def _experiment_task(task):
    kind, n, d, lam, lam_text, seed, cap = task
    g = generate_gnp(n, min(d, n), seed)
    m = _model(g, kind, lam)
    row, dg = diagnose_row(m, n, repr(d), lam_text, str(seed), cap)
    return (n, seed), row, dg.t_mix


def run_experiment(exp: Experiment, threads: int = 1) -> Experiment:
    """Exact diagnostics of G(n, d/n) models for every ``(n, seed)``; rows sorted by key."""
    tasks = [(exp.kind, n, exp.d, exp.lam, exp.lam_text, s, exp.cap) for n in exp.ns for s in exp.seeds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_experiment_task, tasks))
    else:
        results = [_experiment_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    exp.rows = [r[1] for r in results]
    pts = [(key[0], t) for key, _, t in results]
    if len({n for n, _ in pts}) >= 2:
        exp.fit = fit_exponent([n for n, _ in pts], [t for _, t in pts])
    return exp


def experiment_from_values(v: dict) -> Experiment:
    _check(v["model"] in (HARDCORE, MATCHING), f"model must be hardcore or matching, got {v['model']!r}")
    _check(v["n"] is not None, "experiment needs n (e.g. 'n = 6..14')")
    ns = _parse_int_list(str(v["n"]), "n")
    _check(all(n >= 1 for n in ns), "all n must be positive")
    d = v["d"] if v["d"] is not None else 2.0
    _check(d >= 0, "d must be nonnegative")
    if v["seeds"] is not None:
        seeds = _parse_int_list(v["seeds"], "seeds")
        if len(seeds) == 1 and ".." not in v["seeds"] and "," not in v["seeds"]:
            seeds = list(range(v["seed"], v["seed"] + seeds[0]))
    else:
        seeds = [v["seed"]]
    _check(all(s >= 0 for s in seeds), "seeds must be nonnegative")
    cap = v["caps"] if v["caps"] is not None else GAP_CAP
    _check(cap >= 1, "caps must be positive")
    return Experiment(v["model"], ns, d, _parse_lambda(v["lambda"]), v["lambda"], seeds, cap)


def experiment_csv(exp: Experiment, argv: list[str], config: dict) -> str:
    extra = {"model": exp.kind, "n": " ".join(map(str, exp.ns)), "d": exp.d,
             "lambda": exp.lam_text}
    if config:
        extra["config"] = " ".join(f"{k}={v}" for k, v in sorted(config.items()))
    if exp.fit is not None:
        extra["fit"] = exp.fit.describe()
    return metadata(argv, exp.seeds, extra) + DIAGNOSTICS_HEADER + "\n" + \
        "".join(r + "\n" for r in exp.rows)


def cmd_experiment(args, argv) -> int:
    args.n = args.n_list
    v = _resolve(args, raw_keys=("n",))
    exp = experiment_from_values(v)
    run_experiment(exp, _threads())
    _emit(experiment_csv(exp, argv, v["config"]), v["out"])
    if exp.fit is not None:
        print(f"fit: {exp.fit.describe()}", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glauber-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"glauber-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *names):
        p.add_argument("--config", help="file of 'key = value' lines mirroring the flags")
        p.add_argument("--out", help="output path (default stdout)")
        for name in names:
            kind, _ = OPTIONS[name]
            p.add_argument(f"--{name}", dest=name, default=None,
                           type=str if name in ("lambda", "seeds") else kind)

    p = sub.add_parser("gen", help="generate G(n, d/n) as an edge list")
    common(p, "n", "d", "seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", help="run Glauber dynamics and write a time series")
    p.add_argument("graph", nargs="?", help="edge-list file (or use --n/--d/--seed)")
    common(p, "n", "d", "seed", "lambda", "model", "steps", "burnin", "thin")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagnose", help="exact t_mix, spectral gap and conductance")
    p.add_argument("graph", nargs="?", help="edge-list file (or use --n/--d/--seed)")
    common(p, "n", "d", "seed", "lambda", "model", "caps")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("verify", help="run the cross-module invariant suites")
    common(p, "corpus", "trials")
    p.add_argument("--inject-literal-pinning", action="store_true",
                   help="use the literal SAW pinning rule (expected to fail)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="t_mix scaling sweep over n and seeds")
    common(p, "d", "seed", "seeds", "lambda", "model", "caps")
    p.add_argument("--n", dest="n_list", default=None, help="n values, e.g. 6..14 or 6,8,10")
    p.set_defaults(func=cmd_experiment, n=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for key in OPTIONS:
        if not hasattr(args, key):
            setattr(args, key, None)
    try:
        return args.func(args, argv)
    except (SizeCapError, TruncationError, ConvergenceError) as exc:
        print(f"glauber-lab: size cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ParameterError, FormatError, ValueError, GlauberLabError) as exc:
        print(f"glauber-lab: error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
