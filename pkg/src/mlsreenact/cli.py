"""Command-line surface: warp, animate, perturb, points, loss, serve.

Exit codes: 0 success, 2 input/parse error, 3 numerical/degeneracy error,
4 I/O error. MLSR_THREADS caps worker threads for dense evaluation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import DegenerateConfigurationError, InvalidInputError
from .mls import MODES


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            side = int(parts[0])
            size = (side, side)
        elif len(parts) == 2:
            size = (int(parts[0]), int(parts[1]))
        else:
            raise ValueError
    except ValueError:
        raise InvalidInputError(f"size must look like 256 or 256x256, got {text!r}")
    if size[0] < 1 or size[1] < 1:
        raise InvalidInputError(f"size must be positive, got {text!r}")
    return size


def _parse_fill(text: str):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise InvalidInputError(f"fill must be a gray level or comma-separated color, got {text!r}")
    return parts[0] if len(parts) == 1 else tuple(parts)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlsr",
        description="Deterministic MLS reenactment engine: dense warps from paired feature points.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    warp = sub.add_parser("warp", help="warp a source image per a points document")
    warp.add_argument("--source", required=True, help="source PNG")
    warp.add_argument("--points", required=True, help="PointsDocument JSON")
    warp.add_argument("--out", required=True, help="output PNG (stats sidecar written next to it)")
    warp.add_argument("--alpha", type=float, default=None, help="override document alpha")
    warp.add_argument("--mode", choices=MODES, default=None, help="override document mode")
    warp.add_argument("--size", default=None, help="output size WxH (default: source size)")
    warp.add_argument("--fg-mask", default=None, help="foreground mask PNG for background blending")
    warp.add_argument("--occlusion", default=None, help="occlusion mask PNG")
    warp.add_argument("--fill", default="0.5", help="fill gray level or r,g,b for occluded areas")
    warp.add_argument("--workers", type=int, default=None, help="worker threads (default: MLSR_THREADS or cores)")

    animate = sub.add_parser("animate", help="render one frame per track entry")
    animate.add_argument("--source", required=True)
    animate.add_argument("--track", required=True, help="track JSON: shared source set + frames")
    animate.add_argument("--out-dir", required=True)
    animate.add_argument("--alpha", type=float, default=None)
    animate.add_argument("--mode", choices=MODES, default=None)
    animate.add_argument("--size", default=None)
    animate.add_argument("--workers", type=int, default=None)

    perturb = sub.add_parser("perturb", help="seeded single-point perturbation harness")
    perturb.add_argument("--source", default=None, help="optional source PNG; sets the flow raster size")
    perturb.add_argument("--points", required=True)
    perturb.add_argument("--trials", type=int, required=True)
    perturb.add_argument("--seed", type=int, default=0)
    perturb.add_argument("--delta-min", type=float, default=0.05)
    perturb.add_argument("--delta-max", type=float, default=0.5)
    perturb.add_argument("--delta", type=float, default=None, help="fixed displacement magnitude override")
    perturb.add_argument("--size", default=None, help="flow raster WxH (default: source size or 64x64)")
    perturb.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    perturb.add_argument("--workers", type=int, default=None)

    points = sub.add_parser("points", help="extract paired feature points from two images")
    points.add_argument("--source", required=True)
    points.add_argument("--driving", required=True)
    points.add_argument("--weights", default=None, help="PFPW1 weight file (default: fixed-seed stub)")
    points.add_argument("--out", required=True, help="PointsDocument JSON path")
    points.add_argument("--alpha", type=float, default=1.0)
    points.add_argument("--mode", choices=MODES, default="affine")

    loss = sub.add_parser("loss", help="loss report for a points document")
    loss.add_argument("--points", required=True)
    loss.add_argument("--lambda-m", type=float, default=1.0)
    loss.add_argument("--lambda-f", type=float, default=1.0)
    loss.add_argument("--lambda-p", type=float, default=0.0)
    loss.add_argument("--lambda-adv", type=float, default=0.0)
    loss.add_argument("--tau", type=float, default=0.1)
    loss.add_argument("--out", default=None, help="report JSON path (default: stdout)")

    serve = sub.add_parser("serve", help="run the HTTP warp service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--with-ui", action="store_true", help="also serve the workbench static files")

    return parser


def _cmd_warp(args) -> int:
    from .pipeline import run_warp

    stats = run_warp(
        args.source,
        args.points,
        args.out,
        alpha=args.alpha,
        mode=args.mode,
        size=_parse_size(args.size) if args.size else None,
        fg_mask_path=args.fg_mask,
        occlusion_path=args.occlusion,
        fill=_parse_fill(args.fill),
        workers=args.workers,
    )
    print(f"wrote {args.out} (mean displacement {stats['mean_displacement']:.6f})")
    return 0


def _cmd_animate(args) -> int:
    from .pipeline import run_animate

    report = run_animate(
        args.source,
        args.track,
        args.out_dir,
        alpha=args.alpha,
        mode=args.mode,
        size=_parse_size(args.size) if args.size else None,
        workers=args.workers,
    )
    written = len(report["frames"])
    skipped = len(report["failures"])
    print(f"wrote {written}/{report['total']} frames to {args.out_dir}")
    if skipped:
        print(f"{skipped} frame(s) skipped; see animate_report.json", file=sys.stderr)
        return 3
    return 0


def _cmd_perturb(args) -> int:
    from .images import load_png
    from .pipeline import run_perturb

    if args.size:
        size = _parse_size(args.size)
    elif args.source:
        img = load_png(args.source)
        size = (img.width, img.height)
    else:
        size = (64, 64)
    report = run_perturb(
        args.points,
        trials=args.trials,
        seed=args.seed,
        delta_min=args.delta_min,
        delta_max=args.delta_max,
        delta=args.delta,
        size=size,
        workers=args.workers,
    )
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_points(args) -> int:
    from .attention import load_weights
    from .images import load_png
    from .pipeline import document_from_pairs, extract_paired_points, save_points_document

    weights = load_weights(args.weights) if args.weights else None
    pairs = extract_paired_points(load_png(args.source), load_png(args.driving), weights=weights)
    doc = document_from_pairs(pairs, alpha=args.alpha, mode=args.mode)
    save_points_document(doc, args.out)
    print(f"wrote {args.out} ({doc.n} paired points)")
    return 0


def _cmd_loss(args) -> int:
    from .pipeline import LossWeights, document_loss, load_points_document

    doc = load_points_document(args.points)
    weights = LossWeights(
        lambda_p=args.lambda_p,
        lambda_m=args.lambda_m,
        lambda_f=args.lambda_f,
        lambda_adv=args.lambda_adv,
    )
    report = document_loss(doc, weights, tau=args.tau)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(with_ui=args.with_ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "warp": _cmd_warp,
    "animate": _cmd_animate,
    "perturb": _cmd_perturb,
    "points": _cmd_points,
    "loss": _cmd_loss,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DegenerateConfigurationError as exc:
        print(f"error: degenerate configuration: {exc}", file=sys.stderr)
        return 3
    except FloatingPointError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 4
    except (IsADirectoryError, PermissionError, OSError) as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
