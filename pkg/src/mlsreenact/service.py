"""HTTP facade over the pipeline for the workbench and scripts.

Sessions are in-memory. Every mutation replaces an immutable snapshot
(version + PointsDocument) behind a per-session lock, so readers always
see a consistent version/document pair and warp responses for a given
snapshot and query are byte-identical to CLI output for the same inputs.
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import DegenerateConfigurationError, InvalidInputError
from .images import ImageBuffer, decode_png, encode_png
from .pipeline import (
    PointsDocument,
    identity_document,
    perturb_once,
    warp_document,
)
from .warp import dense_flow, flow_stats, flow_to_json_dict

MAX_IMAGE_BYTES = 16 * 1024 * 1024


@dataclass(frozen=True)
class Snapshot:
    version: int
    doc: PointsDocument


class Session:
    def __init__(self, sid: str, source: ImageBuffer, driving: ImageBuffer | None):
        self.id = sid
        self.source = source
        self.driving = driving
        self.lock = threading.Lock()
        self.snapshot = Snapshot(version=1, doc=identity_document())

    def replace(self, doc: PointsDocument) -> int:
        with self.lock:
            snap = Snapshot(version=self.snapshot.version + 1, doc=doc)
            self.snapshot = snap
            return snap.version


class SessionStore:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def create(self, source: ImageBuffer, driving: ImageBuffer | None) -> Session:
        session = Session(uuid.uuid4().hex, source, driving)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, sid: str) -> Session | None:
        with self._lock:
            return self._sessions.get(sid)


class CreateSessionBody(BaseModel):
    source: str
    driving: str | None = None


class PerturbBody(BaseModel):
    point_index: int
    delta: float
    angle: float = 0.0
    size: str | None = None


def _decode_payload(payload: str, field: str) -> ImageBuffer:
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise InvalidInputError(f"{field} is not valid base64: {exc}") from exc
    if len(raw) > MAX_IMAGE_BYTES:
        raise _TooLarge(f"{field} exceeds {MAX_IMAGE_BYTES} bytes")
    return decode_png(raw)


class _TooLarge(Exception):
    pass


def _parse_size(text: str | None, default: tuple[int, int]) -> tuple[int, int]:
    if not text:
        return default
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            return (int(parts[0]), int(parts[0]))
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise InvalidInputError(f"size must look like 256 or 256x64, got {text!r}")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(with_ui: bool = False, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="mlsreenact warp service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Snapshot-Version", "X-Mean-Displacement", "X-Max-Displacement"],
    )
    store = SessionStore()
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            source = _decode_payload(body.source, "source")
            driving = _decode_payload(body.driving, "driving") if body.driving else None
        except _TooLarge as exc:
            return _error(413, str(exc))
        except InvalidInputError as exc:
            return _error(400, str(exc))
        session = store.create(source, driving)
        snap = session.snapshot
        return {
            "id": session.id,
            "version": snap.version,
            "points": snap.doc.to_json_dict(),
            "width": source.width,
            "height": source.height,
        }

    @app.put("/sessions/{sid}/points")
    def set_points(sid: str, body: dict = Body(...)):
        session = store.get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        try:
            doc = PointsDocument.from_json_dict(body)
        except InvalidInputError as exc:
            return _error(422, str(exc))
        version = session.replace(doc)
        return {"version": version}

    @app.get("/sessions/{sid}/warp")
    def get_warp(
        sid: str,
        mode: str | None = Query(default=None),
        alpha: float | None = Query(default=None),
        size: str | None = Query(default=None),
        version: int | None = Query(default=None),
    ):
        session = store.get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        snap = session.snapshot
        if version is not None and version != snap.version:
            return _error(409, f"version {version} is no longer current (now {snap.version})")
        try:
            out_size = _parse_size(size, (session.source.width, session.source.height))
            warped, _, stats = warp_document(
                session.source, snap.doc, alpha=alpha, mode=mode, size=out_size
            )
        except InvalidInputError as exc:
            return _error(422, str(exc))
        except DegenerateConfigurationError as exc:
            return _error(500, f"degenerate configuration: {exc}")
        return Response(
            content=encode_png(warped),
            media_type="image/png",
            headers={
                "X-Snapshot-Version": str(snap.version),
                "X-Mean-Displacement": f"{stats['mean_displacement']:.9f}",
                "X-Max-Displacement": f"{stats['max_displacement']:.9f}",
            },
        )

    @app.post("/sessions/{sid}/perturb")
    def perturb_preview(sid: str, body: PerturbBody):
        session = store.get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        snap = session.snapshot
        if body.delta < 0 or not np.isfinite(body.delta):
            return _error(422, f"delta must be nonnegative, got {body.delta}")
        if not (0 <= body.point_index < snap.doc.n):
            return _error(422, f"point_index {body.point_index} out of range for n={snap.doc.n}")
        try:
            size = _parse_size(body.size, (64, 64))
            displacement = body.delta * np.array([np.cos(body.angle), np.sin(body.angle)])
            if body.delta == 0.0:
                displacement = np.zeros(2)
            report = perturb_once(snap.doc, body.point_index, displacement, size=size)
        except InvalidInputError as exc:
            return _error(422, str(exc))
        except DegenerateConfigurationError as exc:
            return _error(500, f"degenerate configuration: {exc}")
        out = report.to_json_dict()
        out["version"] = snap.version
        return out

    @app.get("/sessions/{sid}/flow")
    def get_flow(sid: str, size: str | None = Query(default=None)):
        session = store.get(sid)
        if session is None:
            return _error(404, f"unknown session {sid}")
        snap = session.snapshot
        try:
            w, h = _parse_size(size, (32, 32))
            if w * h > 64 * 64:
                return _error(422, f"flow preview limited to 64x64 cells, got {w}x{h}")
            flow = dense_flow(snap.doc.pairs(), snap.doc.config(), w, h, external_m=snap.doc.matrix())
        except InvalidInputError as exc:
            return _error(422, str(exc))
        except DegenerateConfigurationError as exc:
            return _error(500, f"degenerate configuration: {exc}")
        out = flow_to_json_dict(flow)
        out["version"] = snap.version
        out["stats"] = flow_stats(flow)
        return out

    if with_ui:
        from fastapi.staticfiles import StaticFiles

        root = ui_dir if ui_dir is not None else Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if not root.is_dir():
            raise InvalidInputError(
                f"workbench build not found at {root}; run `npm run build` in frontend/ first"
            )
        app.mount("/", StaticFiles(directory=root, html=True), name="workbench")

    return app
