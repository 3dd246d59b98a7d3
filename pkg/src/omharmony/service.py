"""HTTP service hosting operator-mask editing sessions.

A session is a directory under the session root:

    <root>/<id>/composite.png     required
    <root>/<id>/labels.png        optional, enables per-region edits
    <root>/<id>/masks.omsk        optional initial masks (else identity)
    <root>/<id>/real.png          optional, reported for reference only

Edits are held in memory as an ordered list on top of the base masks and
replayed on demand, so undo restores earlier states exactly. Nothing on
disk changes until /export.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .errors import UnknownChannel
from .imagecore import (
    ColorSpace,
    ImageBuf,
    encode_png_bytes,
    load_image,
    resize_bilinear,
)
from .retouch import (
    CHANNEL_NAMES,
    OperatorMaskSet,
    apply as retouch_apply,
    edit as edit_masks,
    identity_masks,
    load_omsk,
    save_omsk,
)
from .perturb import LabelMap
from .corpus import decode_label_png


class EditRequest(BaseModel):
    channel: str
    op: str                  # "mul" | "add"
    region: int | str = "all"
    value: float


@dataclass
class SessionState:
    sid: str
    directory: Path
    composite: ImageBuf
    labels: LabelMap | None
    base: OperatorMaskSet
    edits: list = field(default_factory=list)
    current: OperatorMaskSet | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def space(self) -> ColorSpace:
        return self.base.space

    def region_mask(self, region) -> np.ndarray | None:
        if region in ("all", None):
            return None
        if self.labels is None:
            raise KeyError("session has no label map; only 'all' edits work")
        label = int(region)
        mask = self.labels.mask(label)
        if not mask.any():
            raise KeyError(f"label {label} has no pixels")
        return mask

    def rebuild(self) -> OperatorMaskSet:
        masks = self.base
        for e in self.edits:
            masks = edit_masks(masks, e.channel, e.op, e.value, self.region_mask(e.region))
        self.current = masks
        return masks

    def masks(self) -> OperatorMaskSet:
        if self.current is None:
            return self.rebuild()
        return self.current

    def slider_state(self) -> dict:
        """Cumulative edit state per (region, channel): product of mul
        edits and sum of add edits, relative to the base masks."""
        state: dict = {}
        for e in self.edits:
            key = str(e.region)
            slot = state.setdefault(key, {})
            ch = slot.setdefault(e.channel, {"mul": 1.0, "add": 0.0})
            if e.op == "mul":
                ch["mul"] *= e.value
            else:
                ch["add"] += e.value
        return state


def _load_session(root: Path, sid: str) -> SessionState:
    directory = root / sid
    comp_path = directory / "composite.png"
    if not comp_path.exists():
        raise FileNotFoundError(sid)
    composite = load_image(comp_path)
    labels = None
    if (directory / "labels.png").exists():
        labels = decode_label_png(directory / "labels.png")
    if (directory / "masks.omsk").exists():
        base = load_omsk(directory / "masks.omsk")
    else:
        base = identity_masks(composite.width, composite.height)
    return SessionState(sid, directory, composite, labels, base)


def _heatmap_png(plane: np.ndarray, center: float) -> bytes:
    """Diverging colormap: blue below `center`, white at it, red above."""
    dev = plane.astype(np.float64) - center
    scale = max(np.abs(dev).max(), 1e-9)
    t = np.clip(dev / scale, -1.0, 1.0)
    neg = np.array([0.23, 0.30, 0.75])
    pos = np.array([0.71, 0.02, 0.15])
    white = np.ones(3)
    up = t[..., None].clip(0, 1)
    down = (-t)[..., None].clip(0, 1)
    rgb = white * (1 - up - down) + pos * up + neg * down
    buf = ImageBuf.from_hwc(rgb.astype(np.float32), ColorSpace.SRGB_01)
    return encode_png_bytes(buf)


def create_app(session_root: Path, ui_dir: Path | None = None) -> FastAPI:
    """API over `session_root`; `ui_dir`, when given, is served at /ui."""
    root = Path(session_root)
    app = FastAPI(title="omharmony editor service")
    sessions: dict[str, SessionState] = {}
    registry_lock = threading.Lock()

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    def get_session(sid: str) -> SessionState:
        with registry_lock:
            if sid not in sessions:
                try:
                    sessions[sid] = _load_session(root, sid)
                except FileNotFoundError:
                    raise HTTPException(404, f"unknown session {sid!r}")
            return sessions[sid]

    @app.get("/sessions")
    def list_sessions():
        ids = sorted(
            p.name for p in root.iterdir()
            if p.is_dir() and (p / "composite.png").exists()
        ) if root.is_dir() else []
        return {"sessions": ids}

    @app.get("/session/{sid}")
    def session_info(sid: str):
        s = get_session(sid)
        with s.lock:
            regions = []
            if s.labels is not None:
                for label in s.labels.class_ids():
                    regions.append({"label": label, "area": int(s.labels.mask(label).sum())})
            return {
                "id": s.sid,
                "width": s.composite.width,
                "height": s.composite.height,
                "space": s.space.name,
                "channels": list(CHANNEL_NAMES[s.space]),
                "regions": regions,
                "edits": [e.model_dump() for e in s.edits],
                "slider_state": s.slider_state(),
                "has_reference": (s.directory / "real.png").exists(),
            }

    @app.get("/composite/{sid}")
    def composite_png(sid: str):
        s = get_session(sid)
        return Response(encode_png_bytes(s.composite), media_type="image/png")

    @app.get("/regionthumb/{sid}/{label}")
    def region_thumbnail(sid: str, label: int):
        s = get_session(sid)
        if s.labels is None:
            raise HTTPException(422, "session has no label map")
        mask = s.labels.mask(label)
        if not mask.any():
            raise HTTPException(422, f"label {label} has no pixels")
        ys, xs = np.nonzero(mask)
        crop = s.composite.planes[:, ys.min():ys.max() + 1, xs.min():xs.max() + 1]
        buf = ImageBuf(np.ascontiguousarray(crop), s.composite.space)
        scale = max(buf.width, buf.height) / 48.0
        if scale > 1.0:
            buf = resize_bilinear(
                buf, max(1, round(buf.width / scale)), max(1, round(buf.height / scale))
            )
        return Response(encode_png_bytes(buf), media_type="image/png")

    @app.get("/preview/{sid}")
    def preview_png(sid: str):
        s = get_session(sid)
        with s.lock:
            out = retouch_apply(s.composite, s.masks())
        return Response(encode_png_bytes(out), media_type="image/png")

    @app.get("/maskimg/{sid}/{which}/{channel}")
    def mask_heatmap(sid: str, which: str, channel: str):
        s = get_session(sid)
        if which not in ("mul", "add"):
            raise HTTPException(422, "which must be 'mul' or 'add'")
        with s.lock:
            masks = s.masks()
            try:
                idx = masks.channel_index(channel)
            except UnknownChannel as exc:
                raise HTTPException(422, str(exc))
            plane = (masks.mul if which == "mul" else masks.add)[idx]
            center = 1.0 if which == "mul" else 0.0
            png = _heatmap_png(plane, center)
        return Response(png, media_type="image/png")

    @app.post("/edit/{sid}")
    def post_edit(sid: str, req: EditRequest):
        s = get_session(sid)
        if req.op not in ("mul", "add"):
            raise HTTPException(422, "op must be 'mul' or 'add'")
        if not np.isfinite(req.value):
            raise HTTPException(422, "value must be finite")
        if req.channel not in CHANNEL_NAMES[s.space]:
            raise HTTPException(422, f"channel must be one of {CHANNEL_NAMES[s.space]}")
        with s.lock:
            try:
                region_mask = s.region_mask(req.region)
            except (KeyError, ValueError) as exc:
                raise HTTPException(422, str(exc))
            s.current = edit_masks(s.masks(), req.channel, req.op, req.value, region_mask)
            s.edits.append(req)
            state = s.slider_state().get(str(req.region), {}).get(
                req.channel, {"mul": 1.0, "add": 0.0}
            )
            return {"edits": len(s.edits), "cumulative": state}

    @app.post("/undo/{sid}")
    def post_undo(sid: str):
        s = get_session(sid)
        with s.lock:
            if not s.edits:
                raise HTTPException(422, "nothing to undo")
            s.edits.pop()
            s.rebuild()
            return {"edits": len(s.edits)}

    @app.post("/export/{sid}")
    def post_export(sid: str):
        s = get_session(sid)
        with s.lock:
            masks = s.masks()
            omsk_path = s.directory / "export.omsk"
            save_omsk(masks, omsk_path)
            preview = retouch_apply(s.composite, masks)
            png_path = s.directory / "export.png"
            png_path.write_bytes(encode_png_bytes(preview))
            return {"omsk": str(omsk_path), "png": str(png_path), "edits": len(s.edits)}

    return app
