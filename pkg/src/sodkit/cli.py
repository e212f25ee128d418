"""Command-line surface: edge maps, intensity heatmaps, losses, evaluation.

Exit codes: 0 on success, 1 for usage problems, 2 for bad data (unreadable
files, malformed images, unmatched pairs).
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInputError, KernelError
from .grid import Grid2D, binarize
from .loss import api_loss, pixel_intensity, total_loss
from .metrics import evaluate_pair
from .pgm import read_pgm, write_pgm
from .spectral import fft2, highpass, ifft2
from .toynet import ToyConfig, build_toy, demo_image, forward


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Parser that reports usage problems as exceptions instead of exiting."""

    def error(self, message):
        raise _UsageError(message)


@dataclass(frozen=True)
class EvalRow:
    """One table/CSV line of per-image metrics."""

    filename: str
    max_f: float
    mean_f: float
    mae: float
    s_measure: float


def _parse_kernels(text: str):
    try:
        kernels = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not kernels:
        raise argparse.ArgumentTypeError("kernel list must not be empty")
    return kernels


def _load_mask(path) -> Grid2D:
    """Ground-truth masks are binarized at 0.5 so near-binary scans work."""
    return binarize(read_pgm(path), 0.5)


def cmd_edge(args) -> int:
    grid = read_pgm(args.input)
    band = ifft2(highpass(fft2(grid), args.radius))
    write_pgm(args.output, Grid2D(np.abs(band.data)))
    return 0


def cmd_intensity(args) -> int:
    weights = pixel_intensity(_load_mask(args.gt), args.kernels, args.penalty).values
    peak = float(weights.max())
    if peak > 0.0:
        heat = Grid2D(weights / peak)
        print(f"peak intensity {peak:.6f} mapped to 255")
    else:
        heat = Grid2D(weights)
        print("intensity is zero everywhere")
    write_pgm(args.output, heat)
    return 0


def cmd_loss(args) -> int:
    gt = _load_mask(args.gt)
    pred = read_pgm(args.pred)
    report = api_loss(gt, pred, args.kernels, args.penalty)
    if args.json:
        payload = {
            "schema": 1,
            "abce": report.abce,
            "aiou": report.aiou,
            "al1": report.al1,
            "total": report.total,
        }
        print(json.dumps(payload, sort_keys=True))
    else:
        for name in ("abce", "aiou", "al1", "total"):
            print(f"{name} {getattr(report, name):.6f}")
    return 0


def _thread_count() -> int:
    raw = os.environ.get("SODKIT_THREADS")
    if raw is None:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"SODKIT_THREADS must be an integer, got {raw!r}") from None
    if count < 1:
        raise ConfigError(f"SODKIT_THREADS must be at least 1, got {count}")
    return count


def _evaluate_file(gt_dir: Path, pred_dir: Path, name: str) -> EvalRow:
    report = evaluate_pair(_load_mask(gt_dir / name), read_pgm(pred_dir / name))
    return EvalRow(name, report.max_f, report.mean_f, report.mae, report.s_measure)


def _mean_row(rows) -> EvalRow:
    n = len(rows)
    return EvalRow(
        "mean",
        sum(r.max_f for r in rows) / n,
        sum(r.mean_f for r in rows) / n,
        sum(r.mae for r in rows) / n,
        sum(r.s_measure for r in rows) / n,
    )


def _print_table(rows) -> None:
    width = max(len("filename"), max(len(r.filename) for r in rows))
    print(f"{'filename':<{width}} {'max_f':>8} {'mean_f':>8} {'mae':>8} {'s_measure':>10}")
    for r in rows:
        print(f"{r.filename:<{width}} {r.max_f:>8.3f} {r.mean_f:>8.3f} "
              f"{r.mae:>8.3f} {r.s_measure:>10.3f}")


def _csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["filename", "max_f", "mean_f", "mae", "s_measure"])
    for r in rows:
        writer.writerow([r.filename, f"{r.max_f:.6f}", f"{r.mean_f:.6f}",
                         f"{r.mae:.6f}", f"{r.s_measure:.6f}"])
    return buf.getvalue().encode("utf-8")


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt_dir)
    pred_dir = Path(args.pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            raise InvalidInputError(f"not a directory: {d}")
    gt_names = sorted(p.name for p in gt_dir.glob("*.pgm"))
    pred_names = sorted(p.name for p in pred_dir.glob("*.pgm"))
    unmatched = False
    pred_set = set(pred_names)
    gt_set = set(gt_names)
    for name in gt_names:
        if name not in pred_set:
            print(f"no prediction for {name}", file=sys.stderr)
            unmatched = True
    for name in pred_names:
        if name not in gt_set:
            print(f"no ground truth for {name}", file=sys.stderr)
            unmatched = True
    if unmatched:
        return 2
    if not gt_names:
        print(f"no .pgm files in {gt_dir}", file=sys.stderr)
        return 2
    work = functools.partial(_evaluate_file, gt_dir, pred_dir)
    threads = _thread_count()
    if threads == 1:
        rows = [work(name) for name in gt_names]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, gt_names))
    rows.append(_mean_row(rows))
    _print_table(rows)
    if args.csv is not None:
        Path(args.csv).write_bytes(_csv_bytes(rows))
    return 0


def cmd_demo_forward(args) -> int:
    config = ToyConfig(height=args.size, width=args.size, seed=args.seed)
    net = build_toy(config)
    image = demo_image(config.in_channels, config.height, config.width)
    out = forward(net, image, strict=True)
    print(f"config seed {config.seed} size {config.height}x{config.width} "
          f"channels {config.in_channels}")
    print(f"parameters {net.parameter_count()}")
    named = list(zip(("ds0", "ds1", "ds2", "fused"), out.ds)) + [("edge", out.edge)]
    for name, grid in named:
        v = grid.data
        print(f"{name} {grid.height}x{grid.width} min {v.min():.6f} max {v.max():.6f} "
              f"mean {v.mean():.6f} std {v.std():.6f}")
    h, w = config.height, config.width
    target = np.zeros((h, w))
    target[h // 4:3 * h // 4, w // 4:3 * w // 4] = 1.0
    inner = np.zeros((h, w))
    inner[h // 4 + 1:3 * h // 4 - 1, w // 4 + 1:3 * w // 4 - 1] = 1.0
    ring = target - inner
    loss = total_loss(Grid2D(target), out.ds, Grid2D(ring), out.edge,
                      config.kernels, config.penalty)
    print(f"total_loss {loss:.6f}")
    return 0


def build_argument_parser() -> _Parser:
    parser = _Parser(prog="sodkit",
                     description="Edge maps, intensity heatmaps, losses and "
                                 "metrics for saliency masks.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("edge", help="write the high-frequency magnitude of a mask")
    p.add_argument("--input", required=True, help="input PGM image")
    p.add_argument("--radius", type=float, default=16.0,
                   help="stop-band radius in frequency bins (default 16)")
    p.add_argument("--output", required=True, help="output PGM path")
    p.set_defaults(func=cmd_edge)

    p = sub.add_parser("intensity", help="write the pixel intensity heatmap of a mask")
    p.add_argument("--gt", required=True, help="binary mask PGM")
    p.add_argument("--kernels", type=_parse_kernels, default=(3, 15, 31),
                   help="comma-separated window sides (default 3,15,31)")
    p.add_argument("--lambda", dest="penalty", type=float, default=0.5,
                   help="intensity penalty weight (default 0.5)")
    p.add_argument("--output", required=True, help="output PGM path")
    p.set_defaults(func=cmd_intensity)

    p = sub.add_parser("loss", help="score a prediction against a mask")
    p.add_argument("--gt", required=True, help="binary mask PGM")
    p.add_argument("--pred", required=True, help="prediction PGM")
    p.add_argument("--kernels", type=_parse_kernels, default=(3, 15, 31),
                   help="comma-separated window sides (default 3,15,31)")
    p.add_argument("--lambda", dest="penalty", type=float, default=0.5,
                   help="intensity penalty weight (default 0.5)")
    p.add_argument("--json", action="store_true",
                   help="emit the report as a JSON object instead of plain lines")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="evaluate a directory of predictions")
    p.add_argument("--gt-dir", required=True, help="directory of ground-truth PGMs")
    p.add_argument("--pred-dir", required=True, help="directory of prediction PGMs")
    p.add_argument("--csv", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("demo-forward", help="run the deterministic demo network")
    p.add_argument("--seed", type=int, default=42, help="weight seed (default 42)")
    p.add_argument("--size", type=int, default=64,
                   help="square input side, multiple of 8 (default 64)")
    p.set_defaults(func=cmd_demo_forward)
    return parser


def main(argv=None) -> int:
    parser = build_argument_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except SystemExit as ex:
        return ex.code if isinstance(ex.code, int) else 0
    try:
        return args.func(args)
    except (KernelError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
