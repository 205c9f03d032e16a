"""End-to-end orchestration: documents, warping, animation, perturbation.

PointsDocument JSON is the single interchange format between the CLI,
the HTTP service, and the workbench. All report JSON is emitted with
sorted keys so fixed inputs produce byte-identical files; the only
volatile field anywhere is the timing entry in the warp stats sidecar,
which the determinism contract explicitly excludes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import WeightBundle, pair_transform, stub_bundle, stub_embedder
from .errors import EngineError, InvalidInputError
from .heatmaps import SpreadConfig, embeddings_to_points, spreading_loss
from .images import ImageBuffer, MaskBuffer, encode_png, load_mask_png, load_png
from .mls import (
    MODES,
    MlsConfig,
    PairedPointSet,
    Point2,
    TransformMatrix,
    compute_weights,
    motion_loss,
    solve_affine,
    solve_similarity,
)
from .warp import (
    FlowField,
    apply_occlusion,
    backward_warp,
    blend_background,
    dense_flow,
    flow_stats,
    pixel_centers,
)

DEFAULT_N = 10

# fixed grid for the identity document: x on 5 columns, y on 2 rows
_GRID_XS = (0.1, 0.3, 0.5, 0.7, 0.9)
_GRID_YS = (0.3, 0.7)


# ---------------------------------------------------------------- documents

@dataclass(frozen=True)
class PointsDocument:
    """Paired point sets plus the MLS configuration they were made for."""

    n: int
    alpha: float
    mode: str
    source: np.ndarray
    driving: np.ndarray
    external_m: np.ndarray | None = None
    masks: dict | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")
        MlsConfig(alpha=self.alpha, mode=self.mode)
        for name in ("source", "driving"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (self.n, 2):
                raise InvalidInputError(
                    f"{name} must hold {self.n} [x, y] pairs, got shape {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains non-finite coordinates")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise InvalidInputError(f"{name} coordinates must lie in [0, 1]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.external_m is not None:
            m = np.asarray(self.external_m, dtype=np.float64)
            if m.shape != (2, 2) or not np.all(np.isfinite(m)):
                raise InvalidInputError(f"external_m must be a finite 2x2 matrix, got {m}")
            m.setflags(write=False)
            object.__setattr__(self, "external_m", m)
        if self.masks is not None and not isinstance(self.masks, dict):
            raise InvalidInputError("masks must be an object of file references")

    def pairs(self) -> PairedPointSet:
        return PairedPointSet(source=self.source, driving=self.driving)

    def config(self, alpha: float | None = None, mode: str | None = None) -> MlsConfig:
        return MlsConfig(alpha=self.alpha if alpha is None else alpha,
                         mode=self.mode if mode is None else mode)

    def matrix(self) -> TransformMatrix | None:
        if self.external_m is None:
            return None
        return TransformMatrix(self.external_m)

    def to_json_dict(self) -> dict:
        doc = {
            "n": self.n,
            "alpha": self.alpha,
            "mode": self.mode,
            "source": [[float(x), float(y)] for x, y in self.source],
            "driving": [[float(x), float(y)] for x, y in self.driving],
        }
        if self.external_m is not None:
            doc["external_m"] = [[float(v) for v in row] for row in self.external_m]
        if self.masks is not None:
            doc["masks"] = dict(self.masks)
        return doc

    @staticmethod
    def from_json_dict(obj, where: str = "points document") -> "PointsDocument":
        if not isinstance(obj, dict):
            raise InvalidInputError(f"{where}: top level must be an object, got {type(obj).__name__}")
        missing = [k for k in ("n", "source", "driving") if k not in obj]
        if missing:
            raise InvalidInputError(f"{where}: missing required fields {missing}")
        try:
            n = int(obj["n"])
        except (TypeError, ValueError):
            raise InvalidInputError(f"{where}: field 'n' must be an integer, got {obj['n']!r}")
        try:
            return PointsDocument(
                n=n,
                alpha=float(obj.get("alpha", 1.0)),
                mode=str(obj.get("mode", "affine")),
                source=obj["source"],
                driving=obj["driving"],
                external_m=obj.get("external_m"),
                masks=obj.get("masks"),
            )
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"{where}: {exc}") from exc
        except InvalidInputError as exc:
            raise InvalidInputError(f"{where}: {exc}") from exc


def parse_points_json(text: str, where: str = "points document") -> PointsDocument:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"{where}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return PointsDocument.from_json_dict(obj, where=where)


def load_points_document(path) -> PointsDocument:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_points_json(text, where=str(path))


def save_points_document(doc: PointsDocument, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def identity_document() -> PointsDocument:
    """Ten fixed grid points with source equal to driving (identity motion)."""
    grid = [[x, y] for y in _GRID_YS for x in _GRID_XS]
    return PointsDocument(n=DEFAULT_N, alpha=1.0, mode="affine", source=grid, driving=grid)


# ---------------------------------------------------------------- extraction

def extract_paired_points(
    source_img: ImageBuffer,
    driving_img: ImageBuffer,
    weights: WeightBundle | None = None,
    n: int = DEFAULT_N,
) -> PairedPointSet:
    """Embed both images, run the pair transformer, reduce to paired points."""
    bundle = stub_bundle() if weights is None else weights
    l_s = stub_embedder(source_img, n=n, dim=bundle.dim)
    l_d = stub_embedder(driving_img, n=n, dim=bundle.dim)
    l_st, l_dt = pair_transform(l_s, l_d, bundle)
    source_points, _ = embeddings_to_points(l_st)
    driving_points, _ = embeddings_to_points(l_dt)
    return PairedPointSet(
        source=[p.as_array() for p in source_points],
        driving=[p.as_array() for p in driving_points],
    )


def document_from_pairs(pairs: PairedPointSet, alpha: float = 1.0, mode: str = "affine") -> PointsDocument:
    return PointsDocument(n=pairs.n, alpha=alpha, mode=mode, source=pairs.source, driving=pairs.driving)


# ---------------------------------------------------------------- warping

def _resolve_mask(ref, base_dir: Path | None) -> MaskBuffer:
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return load_mask_png(path)


def warp_document(
    source: ImageBuffer,
    doc: PointsDocument,
    *,
    alpha: float | None = None,
    mode: str | None = None,
    size: tuple[int, int] | None = None,
    fg_mask: MaskBuffer | None = None,
    occlusion: MaskBuffer | None = None,
    fill=0.5,
    workers: int | None = None,
    base_dir: Path | None = None,
):
    """Shared warp path for CLI and service: returns (image, flow, stats)."""
    width, height = size if size is not None else (source.width, source.height)
    cfg = doc.config(alpha=alpha, mode=mode)
    masks = doc.masks or {}
    if fg_mask is None and masks.get("foreground"):
        fg_mask = _resolve_mask(masks["foreground"], base_dir)
    if occlusion is None and masks.get("occlusion"):
        occlusion = _resolve_mask(masks["occlusion"], base_dir)

    start = time.perf_counter()
    flow = dense_flow(doc.pairs(), cfg, width, height, external_m=doc.matrix(), workers=workers)
    if fg_mask is not None:
        flow = blend_background(flow, fg_mask)
    warped = backward_warp(source, flow)
    if occlusion is not None:
        warped = apply_occlusion(warped, occlusion, fill)
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    stats = flow_stats(flow)
    stats.update({
        "width": width,
        "height": height,
        "mode": cfg.mode,
        "alpha": cfg.alpha,
        "n": doc.n,
        "timing_ms": elapsed_ms,  # volatile; excluded from byte-identity
    })
    return warped, flow, stats


def run_warp(
    source_path,
    points_path,
    out_path,
    *,
    alpha: float | None = None,
    mode: str | None = None,
    size: tuple[int, int] | None = None,
    fg_mask_path=None,
    occlusion_path=None,
    fill=0.5,
    workers: int | None = None,
) -> dict:
    """Warp one image per a points document; writes the PNG and a stats sidecar."""
    source = load_png(source_path)
    doc = load_points_document(points_path)
    fg_mask = load_mask_png(fg_mask_path) if fg_mask_path else None
    occlusion = load_mask_png(occlusion_path) if occlusion_path else None
    warped, _, stats = warp_document(
        source, doc,
        alpha=alpha, mode=mode, size=size,
        fg_mask=fg_mask, occlusion=occlusion, fill=fill, workers=workers,
        base_dir=Path(points_path).resolve().parent,
    )
    out_path = Path(out_path)
    with open(out_path, "wb") as fh:
        fh.write(encode_png(warped))
    sidecar = out_path.with_name(out_path.name + ".stats.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stats


# ---------------------------------------------------------------- animation

def load_track(path) -> tuple[PointsDocument, list]:
    """Track file: a shared source set plus one driving set per frame."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(obj, dict) or "frames" not in obj or "source" not in obj:
        raise InvalidInputError(f"{path}: track must hold 'source' and 'frames'")
    frames = obj["frames"]
    if not isinstance(frames, list) or len(frames) == 0:
        raise InvalidInputError(f"{path}: track holds no frames")
    base = PointsDocument.from_json_dict(
        {
            "n": obj.get("n", len(obj["source"])),
            "alpha": obj.get("alpha", 1.0),
            "mode": obj.get("mode", "affine"),
            "source": obj["source"],
            "driving": frames[0],
            "external_m": obj.get("external_m"),
        },
        where=str(path),
    )
    return base, frames


def run_animate(
    source_path,
    track_path,
    out_dir,
    *,
    alpha: float | None = None,
    mode: str | None = None,
    size: tuple[int, int] | None = None,
    workers: int | None = None,
) -> dict:
    """One output frame per track entry; frame i depends only on entry i."""
    source = load_png(source_path)
    base, frames = load_track(track_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    frame_reports = []
    failures = []
    for index, driving in enumerate(frames):
        name = f"frame_{index:05d}.png"
        try:
            doc = PointsDocument(
                n=base.n, alpha=base.alpha, mode=base.mode,
                source=base.source, driving=driving, external_m=base.external_m,
            )
            warped, _, stats = warp_document(
                source, doc, alpha=alpha, mode=mode, size=size, workers=workers
            )
        except EngineError as exc:
            failures.append({"index": index, "error": str(exc)})
            continue
        with open(out / name, "wb") as fh:
            fh.write(encode_png(warped))
        frame_reports.append({
            "index": index,
            "file": name,
            "mean_displacement": stats["mean_displacement"],
            "max_displacement": stats["max_displacement"],
        })

    report = {"frames": frame_reports, "failures": failures, "total": len(frames)}
    with open(out / "animate_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


# ---------------------------------------------------------------- perturbation

@dataclass(frozen=True)
class PerturbReport:
    """Flow-change metrics for one perturbation trial."""

    delta: float
    perturbed_index: int
    mean_flow_change: float
    max_flow_change: float
    point_error_change: float

    def __post_init__(self):
        for name in ("delta", "mean_flow_change", "max_flow_change", "point_error_change"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise InvalidInputError(f"{name} must be nonnegative, got {value}")
        if self.perturbed_index < 0:
            raise InvalidInputError(f"perturbed_index must be nonnegative, got {self.perturbed_index}")

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "perturbed_index": self.perturbed_index,
            "mean_flow_change": self.mean_flow_change,
            "max_flow_change": self.max_flow_change,
            "point_error_change": self.point_error_change,
        }


def perturb_once(
    doc: PointsDocument,
    index: int,
    displacement,
    *,
    size: tuple[int, int] = (64, 64),
    base_flow: FlowField | None = None,
    workers: int | None = None,
) -> PerturbReport:
    """Displace one driving point and measure the flow change."""
    if not (0 <= index < doc.n):
        raise InvalidInputError(f"point index {index} out of range for n={doc.n}")
    displacement = np.asarray(displacement, dtype=np.float64)
    width, height = size
    cfg = doc.config()
    if base_flow is None:
        base_flow = dense_flow(doc.pairs(), cfg, width, height, external_m=doc.matrix(), workers=workers)

    driving = doc.driving.copy()
    driving[index] += displacement
    pairs = PairedPointSet(source=doc.source, driving=driving)
    flow = dense_flow(pairs, cfg, width, height, external_m=doc.matrix(), workers=workers)

    change = flow.map - base_flow.map
    mag = np.hypot(change[:, :, 0], change[:, :, 1])
    j = min(int(doc.driving[index, 0] * width), width - 1)
    i = min(int(doc.driving[index, 1] * height), height - 1)
    return PerturbReport(
        delta=float(np.hypot(*displacement)),
        perturbed_index=index,
        mean_flow_change=float(mag.mean()),
        max_flow_change=float(mag.max()),
        point_error_change=float(mag[i, j]),
    )


def run_perturb(
    points_path_or_doc,
    *,
    trials: int,
    seed: int,
    delta_min: float = 0.05,
    delta_max: float = 0.5,
    delta: float | None = None,
    size: tuple[int, int] = (64, 64),
    workers: int | None = None,
) -> dict:
    """Seeded robustness harness: one displaced driving point per trial.

    The metric is flow endpoint error rather than facial-landmark error;
    landmark scoring needs an external trained detector, so the report
    header records the substitution.
    """
    if trials < 1:
        raise InvalidInputError(f"trials must be >= 1, got {trials}")
    if delta is None and not (0.0 <= delta_min <= delta_max):
        raise InvalidInputError(f"need 0 <= delta_min <= delta_max, got {delta_min}, {delta_max}")
    doc = (
        points_path_or_doc
        if isinstance(points_path_or_doc, PointsDocument)
        else load_points_document(points_path_or_doc)
    )
    rng = np.random.default_rng(seed)
    width, height = size
    base_flow = dense_flow(doc.pairs(), doc.config(), width, height,
                           external_m=doc.matrix(), workers=workers)

    reports = []
    for _ in range(trials):
        index = int(rng.integers(0, doc.n))
        magnitude = float(delta) if delta is not None else float(rng.uniform(delta_min, delta_max))
        angle = float(rng.uniform(0.0, 2.0 * np.pi))
        displacement = magnitude * np.array([np.cos(angle), np.sin(angle)])
        if magnitude == 0.0:
            displacement = np.zeros(2)
        reports.append(
            perturb_once(doc, index, displacement, size=size, base_flow=base_flow, workers=workers)
        )

    ratios = [r.mean_flow_change / r.delta for r in reports if r.delta > 0]
    summary = {
        "metric": "flow endpoint error (landmark-error analog; landmark detector out of scope)",
        "trials": len(reports),
        "seed": seed,
        "size": [width, height],
        "delta_range": [delta_min, delta_max] if delta is None else [delta, delta],
        "all_damped": bool(ratios) and all(r < 1.0 for r in ratios),
        "mean_ratio": float(np.mean(ratios)) if ratios else 0.0,
        "median_ratio": float(np.median(ratios)) if ratios else 0.0,
        "max_ratio": float(np.max(ratios)) if ratios else 0.0,
    }
    return {"summary": summary, "trials": [r.to_json_dict() for r in reports]}


# ---------------------------------------------------------------- metrics

def mean_endpoint_error(a: FlowField, b: FlowField) -> float:
    """Mean Euclidean difference between two flow fields."""
    if (a.height, a.width) != (b.height, b.width):
        raise InvalidInputError(
            f"flow dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    diff = a.map - b.map
    return float(np.hypot(diff[:, :, 0], diff[:, :, 1]).mean())


@dataclass(frozen=True)
class LossWeights:
    """Total-loss term weights; perceptual and adversarial terms are echoed only."""

    lambda_p: float = 0.0
    lambda_m: float = 1.0
    lambda_f: float = 1.0
    lambda_adv: float = 0.0

    def __post_init__(self):
        for name in ("lambda_p", "lambda_m", "lambda_f", "lambda_adv"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0.0):
                raise InvalidInputError(f"{name} must be nonnegative, got {value}")


def total_loss(terms: dict, w: LossWeights) -> tuple[float, dict]:
    """Weighted sum of the terms this engine can evaluate, plus a breakdown."""
    motion = terms.get("motion")
    spread = terms.get("spread")
    breakdown = {
        "motion": {"lambda": w.lambda_m, "value": motion,
                   "weighted": None if motion is None else w.lambda_m * motion},
        "spread": {"lambda": w.lambda_f, "value": spread,
                   "weighted": None if spread is None else w.lambda_f * spread},
        "perceptual": {"lambda": w.lambda_p, "status": "unavailable"},
        "adversarial": {"lambda": w.lambda_adv, "status": "unavailable"},
    }
    total = 0.0
    for entry in (breakdown["motion"], breakdown["spread"]):
        if entry["weighted"] is not None:
            total += entry["weighted"]
    return total, breakdown


def document_motion_loss(doc: PointsDocument, grid: int = 16) -> float:
    """Mean weighted point-matching residual of the per-query solves over a grid."""
    pairs = doc.pairs()
    cfg = doc.config()
    centers = pixel_centers(grid, grid).reshape(-1, 2)
    total = 0.0
    for xy in centers:
        x = Point2(*xy)
        w = compute_weights(x, pairs.driving, cfg)
        if cfg.mode == "external":
            m = doc.matrix()
            if m is None:
                raise InvalidInputError("external mode needs external_m for loss evaluation")
        elif cfg.mode == "similarity":
            m = solve_similarity(pairs, w)
        else:
            m = solve_affine(pairs, w)
        total += motion_loss(pairs, m, x, cfg)
    return total / len(centers)


def document_loss(doc: PointsDocument, w: LossWeights, tau: float = 0.1, grid: int = 16) -> dict:
    """Loss report for a document: L_m over a query grid, L_f on driving points."""
    terms = {
        "motion": document_motion_loss(doc, grid=grid),
        "spread": spreading_loss([Point2(*p) for p in doc.driving], SpreadConfig(tau=tau)),
    }
    total, breakdown = total_loss(terms, w)
    return {"total": total, "breakdown": breakdown, "tau": tau, "grid": grid}
