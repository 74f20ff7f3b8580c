"""Command-line entry point: ``ogan <verb> [flags]``.

Exit status is 0 on success, 2 for usage and configuration errors and 1 for
runtime failures; errors are reported on stderr as a single
``error: <kind>: <message>`` line.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import ndnum as nd
from .checkpoint import CheckpointError, load_checkpoint
from .config import VARIANTS, ConfigError, TrainConfig
from .data import DataFormatError, load_image_file, sample_prior
from .evaluation import evaluate_run, interpolate, reconstruction
from .gradsuite import run_suite
from .nets import gen_forward
from .svg import PlotError, curves_svg, emit_scatter
from .trainer import METRICS_HEADER, TrainingDiverged, TrainState, read_metrics, train_loop

EVAL_POINTS = 2000


class UsageError(Exception):
    pass


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ogan", allow_abbrev=False,
                                     description="Orthogonal GAN desk-scale laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", allow_abbrev=False, help="train a model")
    p.add_argument("--config", help="flat JSON TrainConfig (defaults used when omitted)")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--iterations", type=int)
    p.add_argument("--variant", choices=sorted(VARIANTS))
    p.add_argument("--resume", help="checkpoint to continue from")

    p = sub.add_parser("eval", allow_abbrev=False, help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help="directory for eval.txt (and metrics.csv annotation)")
    p.add_argument("--samples", type=_positive, default=10_000)
    p.add_argument("--threshold", type=float, default=0.01, help="minimum share per covered mode")
    p.add_argument("--sigmas", type=float, default=3.0, help="coverage radius in mode std units")

    p = sub.add_parser("sample", allow_abbrev=False, help="draw generator samples")
    p.add_argument("--ckpt", required=True)
    p.add_argument("-n", type=_positive, required=True)
    p.add_argument("--out", required=True, help=".csv for coordinates, .svg for a scatter plot")
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--project", action="store_true",
                   help="project samples onto their first two principal axes")

    p = sub.add_parser("reconstruct", allow_abbrev=False, help="x_hat = G(normalize(E(x)))")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="CSV of points or OIMG image file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("interpolate", allow_abbrev=False, help="decode a path between two codes")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", help="CSV or OIMG file the indices refer to "
                                  "(default: the run's deterministic evaluation sample)")

    p = sub.add_parser("plot", allow_abbrev=False, help="plot metrics.csv as SVG curves")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gradcheck", allow_abbrev=False, help="run the gradient-check suite")
    p.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _csv_text(header: List[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.9g}" for v in row])
    return buf.getvalue()


def _load_points(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"OIMG":
        return load_image_file(path)
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float32)
    except ValueError:
        # a header row
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float32, skiprows=1)


def _eval_points(state: TrainState, n: int = EVAL_POINTS) -> np.ndarray:
    return state.dataset.sample(state.rng.split("eval-data"), n).x


def _load_state(path) -> TrainState:
    return TrainState.from_checkpoint(load_checkpoint(path), path=path)


def cmd_train(args) -> int:
    config = TrainConfig.load(args.config) if args.config else TrainConfig()
    changes = {"out_dir": args.out}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.iterations is not None:
        changes["iterations"] = args.iterations
    if args.variant is not None:
        changes["variant"] = args.variant
    config = config.replace(**changes)
    ckpt = train_loop(config, args.out, resume=args.resume)
    print(f"trained {ckpt.iteration} iterations -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    state = _load_state(args.ckpt)
    report = evaluate_run(state.E, state.G, _eval_points(state), state.dataset.spec,
                          state.rng.split("eval"), args.samples, args.threshold, args.sigmas)
    out = Path(args.out)
    _write_text(out / "eval.txt", report.to_text())
    metrics = out / "metrics.csv"
    if metrics.exists():
        kept = [line for line in metrics.read_text(encoding="utf-8").splitlines()
                if not line.startswith("# eval")]
        _write_text(metrics, "\n".join(kept) + "\n" + report.to_csv_annotation())
    sys.stdout.write(report.to_text())
    return 0


def _project(points: np.ndarray) -> np.ndarray:
    centred = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centred.astype(np.float64), full_matrices=False)
    axes = vt[:2]
    # fix the sign of each axis so the output does not depend on the SVD routine
    axes *= np.where(axes[np.arange(len(axes)), np.abs(axes).argmax(axis=1)] < 0, -1, 1)[:, None]
    return (centred @ axes.T).astype(np.float32)


def cmd_sample(args) -> int:
    state = _load_state(args.ckpt)
    points = gen_forward(state.G, sample_prior(nd.Rng(args.seed), args.n, state.config.n_z))
    if args.project and points.shape[1] > 2:
        points = _project(points)
    if args.out.endswith(".svg"):
        emit_scatter(points, None, args.out)
    else:
        cols = [f"x{i}" for i in range(points.shape[1])]
        _write_text(args.out, _csv_text(cols, points))
    return 0


def cmd_reconstruct(args) -> int:
    state = _load_state(args.ckpt)
    x = _load_points(args.data)
    if x.shape[1] != state.n_x:
        raise UsageError(f"--data has {x.shape[1]} columns, model expects {state.n_x}")
    x_hat = reconstruction(state.E, state.G, x)
    cols = [f"x{i}" for i in range(x.shape[1])] + [f"xhat{i}" for i in range(x.shape[1])]
    _write_text(args.out, _csv_text(cols, np.concatenate([x, x_hat], axis=1)))
    return 0


def cmd_interpolate(args) -> int:
    state = _load_state(args.ckpt)
    pool = _load_points(args.data) if args.data else _eval_points(state)
    for idx in (args.a, args.b):
        if not 0 <= idx < len(pool):
            raise UsageError(f"index {idx} outside 0..{len(pool) - 1}")
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    path = interpolate(state.E, state.G, pool[args.a], pool[args.b], args.steps)
    t = np.linspace(0.0, 1.0, args.steps)[:, None]
    cols = ["t"] + [f"x{i}" for i in range(path.shape[1])]
    _write_text(args.out, _csv_text(cols, np.concatenate([t, path], axis=1)))
    return 0


def cmd_plot(args) -> int:
    rows = read_metrics(args.metrics)
    names = METRICS_HEADER.split(",")[1:]
    series = {name: [r[name] for r in rows] for name in names}
    _write_text(args.out, curves_svg(series, [r["iter"] for r in rows]))
    return 0


def cmd_gradcheck(args) -> int:
    results = run_suite(args.tolerance, report=print)
    worst = max(r.max_rel_err for r in results)
    failed = [r.name for r in results if not r.passed]
    print(f"max_rel_err={worst:.3e} checks={len(results)} failed={len(failed)}")
    return 1 if failed else 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sample": cmd_sample,
    "reconstruct": cmd_reconstruct,
    "interpolate": cmd_interpolate,
    "plot": cmd_plot,
    "gradcheck": cmd_gradcheck,
}


def _fail(kind: str, message, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"error: {kind}: {text}", file=sys.stderr)
    return code


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except (ConfigError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        return _fail("usage", exc, 2)
    except CheckpointError as exc:
        return _fail("checkpoint", exc, 1)
    except TrainingDiverged as exc:
        return _fail("diverged", exc, 1)
    except (DataFormatError, PlotError) as exc:
        return _fail("data", exc, 1)
    except (FileNotFoundError, PermissionError) as exc:
        return _fail("io", f"{exc.strerror}: {exc.filename}", 1)
    except (OSError, ValueError, nd.GraphError) as exc:
        return _fail(type(exc).__name__, exc, 1)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
