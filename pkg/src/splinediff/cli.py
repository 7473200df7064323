"""Command-line interface: ``splinediff {simulate,fit,stream,convergence}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import signal
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import experiments
from .banded import NotPositiveDefinite
from .estimator import CheckpointError, DegenerateDesign, EstimatorState, checkpoint, restore
from .indicator import DEFAULT_GAMMA, reliable_regions

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_CAP = 4


class InputError(Exception):
    pass


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_sample(line: str, lineno: int) -> tuple[float, float]:
    parts = [p.strip() for p in line.strip().split(",")]
    if len(parts) != 2:
        raise InputError(f"line {lineno}: expected 2 fields 'x,y', got {len(parts)}")
    try:
        x, y = float(parts[0]), float(parts[1])
    except ValueError:
        raise InputError(f"line {lineno}: cannot parse {line.strip()!r} as numbers") from None
    if not 0.0 <= x <= 1.0:
        raise InputError(f"line {lineno}: x={parts[0]} is outside [0, 1]")
    if not math.isfinite(y):
        raise InputError(f"line {lineno}: y={parts[1]} is not finite")
    return x, y


def read_samples(stream) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``x,y`` CSV with header.  Blank lines are ignored."""
    header = stream.readline()
    if header and header.strip().lower().replace(" ", "") != "x,y":
        raise InputError(f"line 1: expected header 'x,y', got {header.strip()!r}")
    xs, ys = [], []
    for lineno, line in enumerate(stream, start=2):
        if not line.strip():
            continue
        x, y = parse_sample(line, lineno)
        xs.append(x)
        ys.append(y)
    return np.array(xs, dtype=np.float64), np.array(ys, dtype=np.float64)


def _open_input(path: str):
    if path == "-":
        return io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8")
    return open(path, encoding="utf-8")


def _fmt(v: float) -> str:
    return repr(float(v))


def write_outputs(state: EstimatorState, out_dir: Path, alpha, gamma: float, grid: int,
                  truth: bool = False) -> None:
    """Fit and write coefficients, evaluation grid, histogram and regions."""
    fit = state.fit(alpha)
    out_dir = Path(out_dir)
    atomic_write(out_dir / "coefficients.json",
                 json.dumps(fit.to_json_dict(state.sigma2), indent=2) + "\n")

    xs = np.linspace(0.0, 1.0, grid)
    f, fp = fit.evaluate(xs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if truth:
        w.writerow(["x", "f", "f_prime", "f_true", "f_prime_true"])
        ft, fpt = experiments.truth_f(xs), experiments.truth_fprime(xs)
        for row in zip(xs, f, fp, ft, fpt):
            w.writerow([_fmt(v) for v in row])
    else:
        w.writerow(["x", "f", "f_prime"])
        for row in zip(xs, f, fp):
            w.writerow([_fmt(v) for v in row])
    atomic_write(out_dir / "evaluation.csv", buf.getvalue())

    atomic_write(out_dir / "histogram.csv", state.histogram.to_csv())
    regions = {
        "threshold": gamma,
        "regions": [r.as_dict() for r in reliable_regions(state.histogram, gamma)],
    }
    atomic_write(out_dir / "regions.json", json.dumps(regions, indent=2) + "\n")


def _alpha_arg(args):
    return "prior" if args.alpha is None else args.alpha


def cmd_simulate(args) -> int:
    config = experiments.ExperimentConfig(M=1, N=args.n, sigma2=args.sigma2,
                                          distribution=args.distribution, seed=args.seed)
    buf = io.StringIO()
    buf.write("x,y\n")
    for xs, ys in experiments.generate(config, rep=args.rep):
        for x, y in zip(xs.tolist(), ys.tolist()):
            buf.write(f"{x!r},{y!r}\n")
    if args.output == "-":
        sys.stdout.write(buf.getvalue())
    else:
        atomic_write(Path(args.output), buf.getvalue())
    return EXIT_OK


def cmd_fit(args) -> int:
    state = EstimatorState(args.m, args.sigma2)
    try:
        with _open_input(args.input) as fh:
            xs, ys = read_samples(fh)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    state.ingest_many(xs, ys)
    try:
        write_outputs(state, Path(args.out_dir), _alpha_arg(args), args.gamma, args.grid, args.truth)
    except (DegenerateDesign, NotPositiveDefinite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    if args.checkpoint:
        atomic_write(Path(args.checkpoint), checkpoint(state))
    if state.needs_refinement():
        print(_ADVISORY.format(M=state.M, n=state.n_seen), file=sys.stderr)
    return EXIT_OK


_ADVISORY = ("advisory: M*sigma2/N < d^4 at N={n}; increase M (currently {M}) "
             "and replay the data to improve accuracy")


class _Shutdown(Exception):
    pass


def cmd_stream(args) -> int:
    ckpt = Path(args.checkpoint) if args.checkpoint else None
    if ckpt is not None and ckpt.exists():
        try:
            state = restore(ckpt.read_bytes())
        except CheckpointError as exc:
            print(f"error: cannot resume from {ckpt}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        if state.M != args.m or state.sigma2 != args.sigma2:
            print(f"error: checkpoint has M={state.M}, sigma2={state.sigma2}; "
                  f"flags say M={args.m}, sigma2={args.sigma2}", file=sys.stderr)
            return EXIT_INPUT
    else:
        state = EstimatorState(args.m, args.sigma2)

    out_dir = Path(args.out_dir)
    alpha = _alpha_arg(args)
    refresh = {"pending": False}

    def on_usr1(signum, frame):
        refresh["pending"] = True

    def on_term(signum, frame):
        raise _Shutdown()

    old = {}
    if hasattr(signal, "SIGUSR1"):
        old[signal.SIGUSR1] = signal.signal(signal.SIGUSR1, on_usr1)
    old[signal.SIGTERM] = signal.signal(signal.SIGTERM, on_term)

    def refit():
        try:
            write_outputs(state, out_dir, alpha, args.gamma, args.grid)
        except (DegenerateDesign, NotPositiveDefinite) as exc:
            print(f"warning: refit skipped: {exc}", file=sys.stderr)

    skipped = 0
    advised = False
    since_refit = 0
    stdin = io.TextIOWrapper(sys.stdin.buffer, encoding="utf-8")
    try:
        for lineno, line in enumerate(stdin, start=1):
            text = line.strip()
            if not text or (lineno == 1 and text.lower().replace(" ", "") == "x,y"):
                continue
            try:
                x, y = parse_sample(text, lineno)
            except InputError as exc:
                skipped += 1
                print(f"warning: skipping {exc}", file=sys.stderr)
                continue
            state.ingest(x, y)
            since_refit += 1
            if not advised and state.needs_refinement():
                advised = True
                print(_ADVISORY.format(M=state.M, n=state.n_seen), file=sys.stderr, flush=True)
            if refresh["pending"] or (args.refit_every and since_refit >= args.refit_every):
                refresh["pending"] = False
                since_refit = 0
                refit()
    except (_Shutdown, KeyboardInterrupt):
        print("info: shutting down", file=sys.stderr)
    finally:
        for sig, handler in old.items():
            signal.signal(sig, handler)

    if state.n_seen:
        refit()
    if ckpt is not None:
        atomic_write(ckpt, checkpoint(state))
    if skipped:
        print(f"warning: {skipped} malformed line(s) skipped", file=sys.stderr)
    print(f"info: {state.n_seen} samples ingested", file=sys.stderr)
    return EXIT_OK


def cmd_convergence(args) -> int:
    if args.m_list:
        M_list = [int(v) for v in args.m_list.split(",") if v.strip()]
    else:
        M_list = experiments.FULL_SWEEP if args.full else experiments.DEFAULT_SWEEP

    def progress(M, N, rep, e, ep):
        if args.verbose:
            print(f"M={M} N={N} rep={rep} e={e:.4e} e'={ep:.4e}", file=sys.stderr)

    try:
        result = experiments.convergence_study(
            M_list, repetitions=args.reps, seed=args.seed, sigma2=args.sigma2,
            cap_samples=args.cap_samples, progress=progress,
        )
    except experiments.ResourceCapExceeded as exc:
        print(f"error: {exc} (raise --cap-samples to allow it)", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_dir = Path(args.out_dir)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["M", "N", "rep", "e_l2", "eprime_l2"])
    for M, N, rep, e, ep in result.rows:
        w.writerow([M, N, rep, _fmt(e), _fmt(ep)])
    atomic_write(out_dir / "convergence.csv", buf.getvalue())
    summary = result.summary()
    summary.update({"sigma2": args.sigma2, "repetitions": args.reps, "seed": args.seed})
    atomic_write(out_dir / "convergence_summary.json", json.dumps(summary, indent=2) + "\n")
    if result.slope_f is not None:
        print(f"slope_f={result.slope_f:.4f} slope_fprime={result.slope_fprime:.4f}")
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _positive_float(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def _grid(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinediff",
        description="Online penalized-spline reconstruction of a function and its derivative "
                    "from noisy scattered samples on [0, 1].",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def fit_flags(p):
        p.add_argument("--m", type=_positive_int, default=40, help="number of knot cells (default 40)")
        p.add_argument("--sigma2", type=_positive_float, required=True, help="noise variance")
        p.add_argument("--alpha", type=_positive_float, default=None,
                       help="fixed regularization parameter (default: M*sigma2/N + d^4)")
        p.add_argument("--gamma", type=_positive_float, default=DEFAULT_GAMMA,
                       help="indicator threshold for reliable regions (default 0.1)")
        p.add_argument("--grid", type=_grid, default=1001, help="evaluation grid size (default 1001)")
        p.add_argument("--out-dir", default=".", help="directory for output files")

    p = sub.add_parser("simulate", help="write synthetic samples of the built-in test function")
    p.add_argument("--n", type=_positive_int, default=600)
    p.add_argument("--sigma2", type=_positive_float, default=experiments.DEFAULT_SIGMA2)
    p.add_argument("--distribution", choices=[d.value for d in experiments.PointDistribution],
                   default="uniform")
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--rep", type=_nonneg_int, default=0)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a CSV file of samples in one pass")
    p.add_argument("input", help="CSV with header x,y ('-' for stdin)")
    fit_flags(p)
    p.add_argument("--truth", action="store_true",
                   help="add the built-in test function and its derivative to evaluation.csv")
    p.add_argument("--checkpoint", default=None, help="also save the estimator state here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("stream", help="ingest samples from stdin, refitting periodically")
    fit_flags(p)
    p.add_argument("--refit-every", type=_nonneg_int, default=10_000,
                   help="refit after this many new samples (0 disables; SIGUSR1 forces a refit)")
    p.add_argument("--checkpoint", default=None,
                   help="resume from this file if present; written on shutdown")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("convergence", help="run the N = M^5/10^4 convergence-rate study")
    p.add_argument("--m-list", default=None, help="comma-separated M values (default 50,60,...,110)")
    p.add_argument("--full", action="store_true", help="sweep M = 50..250 (needs a large --cap-samples)")
    p.add_argument("--reps", type=_positive_int, default=12)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--sigma2", type=_positive_float, default=experiments.STUDY_SIGMA2)
    p.add_argument("--cap-samples", type=_positive_int, default=experiments.DEFAULT_CAP_SAMPLES)
    p.add_argument("--out-dir", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
