"""Command-line front end: ``blocksketch {sketch,bench,coherence,smoothing,validate}``.

Every run echoes its configuration together with a SHA-256 hash of the
canonical JSON form, so a result file is enough to replay the run.
"""
from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import coherence_report, planted_coherent_basis, smoothing_experiment
from .data import DatasetKind, DatasetSpec, gen_gaussian, load_dataset, write_dense
from .hashing import Stream, derive_seed
from .layout import DEFAULT_TK, DEFAULT_TN, IntraMode, Precision
from .operator import apply_tiled, build_operator
from .tasks import (Method, Task, TaskReport, gram_error, make_sketch, ose_spectral_error,
                    orthonormal_basis, ridge_solve, sketch_solve_lsq, time_apply,
                    write_reports_csv, write_reports_jsonl)
from .theoryval import (energy_identity_check, kappa_comparison_check, ose_scaling_check,
                        sandwich_bound_check)
from .wiring import iterated_wiring

log = logging.getLogger("blocksketch")

ENV_WORKERS = "BLOCKSKETCH_WORKERS"
ENV_OUT_DIR = "BLOCKSKETCH_OUT_DIR"


class CommandError(Exception):
    """Raised for invalid run configurations detected after argument parsing."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must be non-empty")
    return [_positive_int(t) for t in items]


def _float_list(text: str) -> list[float]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("list must be non-empty")
    out = [float(t) for t in items]
    if any(v < 0 for v in out):
        raise argparse.ArgumentTypeError("lambda values must be >= 0")
    return out


def _name_list(choices):
    def parse(text: str) -> list[str]:
        items = [t.strip() for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if bad:
            raise argparse.ArgumentTypeError(f"unknown entries {bad}; choose from {sorted(choices)}")
        return items
    return parse


def _default_workers() -> int:
    raw = os.environ.get(ENV_WORKERS)
    if raw is None:
        return 1
    try:
        return _positive_int(raw)
    except argparse.ArgumentTypeError:
        raise CommandError(f"{ENV_WORKERS}={raw!r} is not a positive integer") from None


def _resolve_out(path: str | None, default: str) -> Path:
    p = Path(path or default)
    base = os.environ.get(ENV_OUT_DIR)
    if base and not p.is_absolute():
        p = Path(base) / p
    parent = p.parent if str(p.parent) else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    if not os.access(parent, os.W_OK):
        raise CommandError(f"output directory {parent} is not writable")
    return p


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _dataset_spec(args, d: int, n: int) -> DatasetSpec:
    return DatasetSpec(DatasetKind(args.dataset), d, n, rank=args.rank, noise_sigma=args.noise,
                       path=args.path, seed=args.seed)


def _add_dataset_args(p, dataset_default="gaussian"):
    p.add_argument("--dataset", choices=[k.value for k in DatasetKind], default=dataset_default)
    p.add_argument("--path", help="Matrix Market file for --dataset mtx")
    p.add_argument("--rank", type=_positive_int, help="rank for --dataset lowrank")
    p.add_argument("--noise", type=float, default=0.1, help="noise sigma for --dataset lowrank")


def _add_common(p):
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"worker threads (default ${ENV_WORKERS} or 1)")


# ---------------------------------------------------------------------------
# sketch
# ---------------------------------------------------------------------------

def cmd_sketch(args) -> int:
    config = {"subcommand": "sketch", "d": args.d, "n": args.n, "k": args.k, "M": args.M,
              "kappa": args.kappa, "s": args.s, "seed": args.seed, "dataset": args.dataset,
              "path": args.path, "rank": args.rank, "noise": args.noise,
              "precision": args.precision, "intra_mode": args.intra_mode,
              "Tk": args.Tk, "Tn": args.Tn, "version": __version__}
    out = _resolve_out(args.out, "y.bin")
    op = build_operator(args.d, args.k, args.M, args.kappa, args.s, args.seed,
                        IntraMode(args.intra_mode), Precision(args.precision), args.Tk, args.Tn)
    A = load_dataset(_dataset_spec(args, args.d, args.n), dtype=op.dtype)
    t0 = time.perf_counter_ns()
    Y = apply_tiled(op, A, workers=args.workers)
    elapsed = time.perf_counter_ns() - t0
    write_dense(out, Y)
    summary = {"config": config, "config_hash": config_hash(config), "output": str(out),
               "shape": list(Y.shape), "dtype": str(Y.dtype), "apply_ns": elapsed,
               "workers": args.workers, "layout": op.layout.to_dict(),
               "wiring": op.wiring.to_dict()}
    _write_json(out.with_suffix(".json"), summary)
    print(f"wrote {out} ({Y.shape[0]}x{Y.shape[1]} {Y.dtype})")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_points(args):
    for k, kappa, s, M in itertools.product(args.k, args.kappa, args.s, args.M):
        yield {"k": k, "kappa": kappa, "s": s, "M": M}


def _bench_rows(args, A, b, method, point, trial, chash):
    seed_t = derive_seed(args.seed, Stream.TRIAL, trial)
    common = dict(method=method, d=args.d, n=args.n, seed=args.seed, trial=trial,
                  config_hash=chash, **point)
    sketch = make_sketch(method, args.d, point["k"], point["M"], point["kappa"], point["s"],
                         seed_t, workers=args.workers, precision=Precision(args.precision))
    _, ns = time_apply(sketch, A, warmup=args.warmup, repeats=args.repeats)
    ns = int(round(ns))
    rows = []
    for task in args.tasks:
        if task == Task.GRAM.value:
            rows.append(TaskReport(task, lam=None, r=None, metric=gram_error(A, sketch(A))[1],
                                   wall_time_ns=ns, **common))
        elif task == Task.OSE.value:
            r = min(args.r, args.d, args.n)
            err = ose_spectral_error(sketch, A, r=r)
            rows.append(TaskReport(task, lam=None, r=r, metric=err, wall_time_ns=ns, **common))
        elif task == Task.RIDGE.value:
            for lam in args.lam:
                res = ridge_solve(A, b, lam, sketch).residual
                rows.append(TaskReport(task, lam=lam, r=None, metric=res, wall_time_ns=ns,
                                       **common))
        elif task == Task.LSQ.value:
            res = sketch_solve_lsq(A, b, sketch).residual
            rows.append(TaskReport(task, lam=None, r=None, metric=res, wall_time_ns=ns, **common))
        elif task == Task.TAIL.value:
            x = A[:, 0]
            y = np.asarray(sketch(x), dtype=np.float64)
            dist = abs(float(y @ y) / float(x @ x) - 1.0)
            rows.append(TaskReport(task, lam=None, r=None, metric=dist, wall_time_ns=ns,
                                   **common))
    return rows


def _aggregate(reports) -> list[dict]:
    groups: dict[tuple, list] = {}
    for rep in reports:
        key = (rep.method, rep.task, rep.k, rep.M, rep.kappa, rep.s, rep.lam)
        groups.setdefault(key, []).append(rep)
    out = []
    for (method, task, k, M, kappa, s, lam), reps in groups.items():
        m = np.array([r.metric for r in reps])
        t = np.array([r.wall_time_ns for r in reps], dtype=np.float64)
        q50, q90, q99 = np.quantile(m, [0.5, 0.9, 0.99])
        out.append({"method": method, "task": task, "k": k, "M": M, "kappa": kappa, "s": s,
                    "lam": lam, "trials": len(reps), "metric_mean": float(m.mean()),
                    "metric_median": float(q50), "metric_q90": float(q90),
                    "metric_q99": float(q99), "time_ns_mean": float(t.mean())})
    return out


def regression_target(A, seed: int, noise: float = 0.1) -> np.ndarray:
    """``b = A x* + noise * e`` with ``x* ~ N(0, I/n)`` and ``e ~ N(0, I)``."""
    d, n = A.shape
    x_star = gen_gaussian(n, 1, derive_seed(seed, Stream.DATA, 1))[:, 0] / np.sqrt(n)
    e = gen_gaussian(d, 1, derive_seed(seed, Stream.DATA, 2))[:, 0]
    return np.asarray(A, dtype=np.float64) @ x_star + noise * e


def cmd_bench(args) -> int:
    if not args.tasks:
        args._parser.error("task list must be non-empty")
    fmt = args.format or ("jsonl" if str(args.out or "").endswith(".jsonl") else "csv")
    out = _resolve_out(args.out, f"bench.{fmt}")
    config = {"subcommand": "bench", "d": args.d, "n": args.n, "dataset": args.dataset,
              "path": args.path, "rank": args.rank, "noise": args.noise, "tasks": args.tasks,
              "methods": args.methods, "k": args.k, "kappa": args.kappa, "s": args.s,
              "M": args.M, "lam": args.lam, "r": args.r, "target_noise": args.target_noise,
              "trials": args.trials,
              "seed": args.seed, "precision": args.precision, "warmup": args.warmup,
              "repeats": args.repeats, "version": __version__}
    chash = config_hash(config)
    dtype = Precision(args.precision).dtype
    A = load_dataset(_dataset_spec(args, args.d, args.n)).astype(dtype, copy=False)
    b = regression_target(A, args.seed, args.target_noise).astype(dtype)
    reports = []
    for method in args.methods:
        for point in _bench_points(args):
            for trial in range(args.trials):
                reports.extend(_bench_rows(args, A, b, method, point, trial, chash))
    if fmt == "csv":
        write_reports_csv(out, reports)
    else:
        write_reports_jsonl(out, reports)
    summary = {"config": config, "config_hash": chash, "rows": len(reports),
               "output": str(out), "aggregate": _aggregate(reports)}
    _write_json(out.with_name(out.stem + ".summary.json"), summary)
    print(f"wrote {len(reports)} rows to {out}")
    return 0


# ---------------------------------------------------------------------------
# coherence / smoothing
# ---------------------------------------------------------------------------

def _subspace(args) -> np.ndarray:
    if args.planted:
        return planted_coherent_basis(args.d, args.r, args.M)
    A = load_dataset(_dataset_spec(args, args.d, args.r))
    return orthonormal_basis(A, args.r)


def cmd_coherence(args) -> int:
    U = _subspace(args)
    w = iterated_wiring(args.seed, args.M, args.kappa)
    rep = coherence_report(U, args.M, w)
    ok = rep.mu_blk / rep.kappa * (1 - 1e-12) <= rep.mu_nbr <= rep.mu_blk * (1 + 1e-12)
    config = {"subcommand": "coherence", "d": args.d, "r": args.r, "M": args.M,
              "kappa": args.kappa, "seed": args.seed, "dataset": args.dataset,
              "planted": args.planted, "version": __version__}
    result = {"config": config, "config_hash": config_hash(config), **rep.to_dict(),
              "sandwich_ok": bool(ok), "wiring": w.to_dict()}
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        out = _resolve_out(args.out, "coherence.json")
        out.write_text(text + "\n")
    print(text)
    return 0


def cmd_smoothing(args) -> int:
    U = _subspace(args)
    rows, summaries = smoothing_experiment(U, args.M, args.kappa, args.trials, args.seed)
    config = {"subcommand": "smoothing", "d": args.d, "r": args.r, "M": args.M,
              "kappa": args.kappa, "trials": args.trials, "seed": args.seed,
              "dataset": args.dataset, "planted": args.planted, "version": __version__}
    result = {"config": config, "config_hash": config_hash(config),
              "summary": [vars(s) for s in summaries], "trials": [vars(r) for r in rows]}
    out = _resolve_out(args.out, "smoothing.json")
    _write_json(out, result)
    print(f"{'kappa':>6} {'median mu_nbr':>14} {'min':>10} {'max':>10}")
    for s in summaries:
        print(f"{s.kappa:>6} {s.median:>14.4f} {s.min:>10.4f} {s.max:>10.4f}")
    print(f"mu_blk = {summaries[0].mu_blk:.4f}; wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    out_dir = _resolve_out(os.path.join(args.out or "validation", "x"), "").parent
    rng = np.random.Generator(np.random.Philox(derive_seed(args.seed, Stream.DATA, 2)))
    U = np.linalg.qr(rng.standard_normal((args.d, args.r)))[0]
    k_list = [k for k in (256, 512, 1024, 2048, 4096) if k <= args.d]
    checks = {
        "energy_identity": lambda: energy_identity_check(args.trials, args.seed),
        "sandwich_bound": lambda: sandwich_bound_check(args.trials, args.seed),
        "ose_scaling": lambda: ose_scaling_check(U, k_list, args.ose_trials, args.seed,
                                                 M=16, kappa=4, s=2),
        "kappa_comparison": lambda: kappa_comparison_check(
            planted_coherent_basis(args.d, args.r, 16), k=512, M=16, seed=args.seed),
    }
    failed = 0
    for name, run in checks.items():
        rep = run()
        _write_json(out_dir / f"{name}.json", rep.to_dict())
        failed += not rep.passed
        print(f"{'PASS' if rep.passed else 'FAIL'} {name}")
    print(f"reports in {out_dir}")
    return 1 if failed else 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blocksketch", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sk = sub.add_parser("sketch", help="apply one operator to a dataset and dump Y")
    for name in ("d", "n", "k", "M", "kappa", "s"):
        sk.add_argument(f"--{name}", type=_positive_int, required=True)
    _add_dataset_args(sk)
    _add_common(sk)
    sk.add_argument("--out", help="output binary (summary goes next to it as .json)")
    sk.add_argument("--precision", choices=[x.value for x in Precision], default="f64")
    sk.add_argument("--intra-mode", choices=[x.value for x in IntraMode], default="affine")
    sk.add_argument("--Tk", type=_positive_int, default=DEFAULT_TK)
    sk.add_argument("--Tn", type=_positive_int, default=DEFAULT_TN)
    sk.set_defaults(func=cmd_sketch)

    be = sub.add_parser("bench", help="task metrics and timings over a parameter sweep")
    be.add_argument("--d", type=_positive_int, required=True)
    be.add_argument("--n", type=_positive_int, required=True)
    be.add_argument("--tasks", type=_name_list({t.value for t in Task}), default=["gram"])
    be.add_argument("--methods", type=_name_list({m.value for m in Method}),
                    default=[Method.BLOCKPERM_TILED.value])
    be.add_argument("--k", type=_int_list, required=True)
    be.add_argument("--kappa", type=_int_list, default=[4])
    be.add_argument("--s", type=_int_list, default=[2])
    be.add_argument("--M", type=_int_list, default=[16])
    be.add_argument("--lam", type=_float_list, default=[1.0])
    be.add_argument("--r", type=_positive_int, default=16, help="subspace rank for the ose task")
    be.add_argument("--target-noise", type=float, default=0.1,
                    help="noise level of the planted regression target b = A x* + noise e")
    be.add_argument("--trials", type=_positive_int, default=1)
    be.add_argument("--warmup", type=_nonneg_int, default=2)
    be.add_argument("--repeats", type=_positive_int, default=10)
    be.add_argument("--precision", choices=[x.value for x in Precision], default="f64")
    be.add_argument("--format", choices=["csv", "jsonl"])
    be.add_argument("--out")
    _add_dataset_args(be)
    _add_common(be)
    be.set_defaults(func=cmd_bench, _parser=be)

    for name, func, helptext in (("coherence", cmd_coherence, "block and neighborhood coherence"),
                                 ("smoothing", cmd_smoothing, "coherence under random wirings")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--d", type=_positive_int, default=4096 if name == "smoothing" else 1024)
        c.add_argument("--r", type=_positive_int, default=16)
        c.add_argument("--M", type=_positive_int, required=True)
        if name == "coherence":
            c.add_argument("--kappa", type=_positive_int, required=True)
        else:
            c.add_argument("--kappa", type=_int_list, default=[1, 2, 4, 8, 16, 32])
            c.add_argument("--trials", type=_positive_int, default=100)
        c.add_argument("--planted", action="store_true", help="use a frame on one row block")
        c.add_argument("--out")
        _add_dataset_args(c)
        _add_common(c)
        c.set_defaults(func=func)

    va = sub.add_parser("validate", help="run the theory checks; exit 1 if any fails")
    va.add_argument("--d", type=_positive_int, default=4096)
    va.add_argument("--r", type=_positive_int, default=16)
    va.add_argument("--trials", type=_positive_int, default=1000)
    va.add_argument("--ose-trials", type=_positive_int, default=50)
    va.add_argument("--out", help="report directory (default ./validation)")
    _add_common(va)
    va.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", 0) is None:
            args.workers = _default_workers()
        return args.func(args)
    except (CommandError, ValueError, OSError, IndexError) as exc:
        print(f"blocksketch {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
