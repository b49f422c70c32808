"""Command-line front end.

    python -m symkorobov counts --d 1-6 --n-min 1 --n-max 8 --out counts.csv
    python -m symkorobov rates --d 1,2,3 --n-min 3 --n-max 7 --target prod_sine
    python -m symkorobov net-verify --d 2 --n-min 2 --n-max 2 --out verify.csv
    python -m symkorobov gradient-fit --d 2 --n-min 3 --n-max 3 --samples 100,1000,10000 --noise 0.1

Every run writes a CSV (to ``--out`` or stdout) and, with ``--out``, a JSON
sidecar next to it echoing the configuration and the summary. Exit status:
0 when every invariant holds, 1 on an invariant failure, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from .experiments import COMMANDS, ConfigError, ExperimentConfig, ExperimentResult, run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> tuple[int, ...]:
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(v) for v in part.split("-", 1))
                out.extend(range(lo, hi + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like '2' or '1,3' or '1-6', got {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty integer list")
    return tuple(out)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symkorobov", description="Symmetric sparse grids and squared-ReLU network synthesis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--d", type=_int_list, default=(2,), help="dimensions, e.g. 2 or 1,2,3 or 1-6")
        p.add_argument("--n-min", type=int, default=1)
        p.add_argument("--n-max", type=int, default=4)
        p.add_argument("--target", default="prod_sine")
        p.add_argument("--delta", type=float, default=None, help="smoothing width in x units (default 2^-(n+6) times the finest mesh width)")
        p.add_argument("--quad", choices=("auto", "tensor", "qmc"), default="auto")
        p.add_argument("--samples", type=_float_list, default=(100, 1000, 10000), help="sample counts M for gradient-fit")
        p.add_argument("--noise", type=_float_list, default=(0.1,), help="noise levels for gradient-fit")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--seeds", type=int, default=10, help="repetitions per sample count (gradient-fit)")
        p.add_argument("--source", choices=("target", "interpolant"), default="target", help="gradient data source (gradient-fit)")
        p.add_argument("--check-points", type=int, default=10_000, help="sample points per check (net-verify)")
        p.add_argument("--out", default=None, help="CSV path; a .json sidecar is written next to it")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    samples = tuple(int(v) for v in args.samples)
    if any(s != v for s, v in zip(samples, args.samples)):
        raise ConfigError("--samples must be integers")
    return ExperimentConfig(
        command=args.command,
        d=args.d,
        n_min=args.n_min,
        n_max=args.n_max,
        target=args.target,
        delta=args.delta,
        quad=args.quad,
        samples=samples,
        noise=args.noise,
        seed=args.seed,
        out=args.out,
        source=args.source,
        seeds=args.seeds,
        check_points=args.check_points,
    )


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def render_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.header)
    for row in result.rows:
        writer.writerow([_cell(v) for v in row])
    for line in result.footer:
        buf.write(line + "\n")
    return buf.getvalue()


def sidecar_path(out: str) -> Path:
    return Path(out).with_suffix(".json")


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult, stdout=None) -> None:
    text = render_csv(result)
    if cfg.out is None:
        (stdout or sys.stdout).write(text)
        return
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    side = {"config": cfg.to_dict(), "summary": result.summary, "failures": result.failures, "ok": result.ok}
    sidecar_path(cfg.out).write_text(json.dumps(side, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(v):
    if hasattr(v, "item"):
        return v.item()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"not serialisable: {type(v)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"symkorobov: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = run(cfg)
    write_outputs(cfg, result)
    for msg in result.failures:
        print(f"FAIL {msg}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
