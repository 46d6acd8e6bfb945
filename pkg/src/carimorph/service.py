"""HTTP service exposing the shape model and exaggeration control.

The service wraps an immutable session: one PCA model, one mean head, and
named head slots each pairing a generated caricature with its reconstructed
normal head.  Exaggeration requests are pure functions of that state, so
identical requests produce byte-identical payloads; slot replacement swaps
the whole mapping atomically under a writer lock.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, model_validator

from . import wire
from .errors import CarimorphError, ShapeMismatchError
from .exaggerate import FeatureVector, MeanHead, feature_vector, user_control
from .mesh import HeadMesh, load_mesh
from .pca import CariPcaModel, PcaCoeffs, decode, encode, load_model

logger = logging.getLogger("carimorph.service")


@dataclass(frozen=True, eq=False)
class HeadSlot:
    """One identity: the generated caricature and the reconstructed head."""

    slot_id: str
    cari: HeadMesh     # G(p)
    normal: HeadMesh   # H(p)


class SessionState:
    """Shared service state: immutable model and mean head, plus a slot map
    replaced copy-on-write so readers always see a consistent snapshot."""

    def __init__(self, model: CariPcaModel, mean_head: MeanHead):
        if model.n_v != mean_head.n_v:
            raise ShapeMismatchError(
                f"model has {model.n_v} vertices, mean head has {mean_head.n_v}"
            )
        self.model = model
        self.mean_head = mean_head
        self._slots: dict[str, HeadSlot] = {}
        self._write_lock = threading.Lock()

    @property
    def slots(self) -> dict[str, HeadSlot]:
        return self._slots

    def add_slot(self, slot: HeadSlot) -> None:
        for mesh, name in ((slot.cari, "caricature"), (slot.normal, "normal")):
            if mesh.n_v != self.model.n_v:
                raise ShapeMismatchError(
                    f"slot {slot.slot_id!r} {name} mesh has {mesh.n_v} vertices, "
                    f"model expects {self.model.n_v}"
                )
        with self._write_lock:
            new = dict(self._slots)
            new[slot.slot_id] = slot
            self._slots = new


def load_session(
    model_path: str | Path,
    mean_path: str | Path,
    head_specs: list[tuple[str, str, str]] | None = None,
) -> SessionState:
    """Build a session from files: the binary model, the mean head OBJ, and
    (name, caricature path, normal path) head slots.

    The caricature side may be an OBJ mesh or a JSON file {"coeffs": [...]}
    decoded through the model.
    """
    model = load_model(model_path)
    mean_head = MeanHead(load_mesh(mean_path))
    state = SessionState(model, mean_head)
    for name, cari_path, normal_path in head_specs or []:
        cari = _load_head(model, cari_path)
        normal = load_mesh(normal_path)
        state.add_slot(HeadSlot(name, cari, normal))
    return state


def _load_head(model: CariPcaModel, path: str | Path) -> HeadMesh:
    path = Path(path)
    if path.suffix == ".json":
        import json

        coeffs = json.loads(path.read_text(encoding="utf-8"))["coeffs"]
        return decode(model, PcaCoeffs(np.asarray(coeffs)))
    return load_mesh(path)


# ---------------------------------------------------------------------------
# Request / response schemas


class ExaggerateRequest(BaseModel):
    head_id: str | None = None
    coeffs: list[float] | None = None
    u1: float = Field(description="weight of the generated caricature feature")
    u2: float = Field(description="weight of the reconstructed head feature")

    @model_validator(mode="after")
    def _check(self):
        if self.head_id is None and self.coeffs is None:
            raise ValueError("one of head_id or coeffs is required")
        if not (np.isfinite(self.u1) and np.isfinite(self.u2)):
            raise ValueError("u1 and u2 must be finite")
        return self


class ModelInfo(BaseModel):
    n_v: int
    d: int
    variance_ratios: list[float]


class HeadInfo(BaseModel):
    id: str
    # Shape-space code of the slot's caricature; lets clients offset
    # individual coefficients and send them back through /exaggerate.
    cari_coeffs: list[float]


class HeadsResponse(BaseModel):
    heads: list[HeadInfo]


class MeshJson(BaseModel):
    n_v: int
    n_f: int
    vertices: list[float]
    faces: list[int]


def _mesh_response(mesh: HeadMesh, fmt: str) -> Response:
    if fmt == "json":
        body = MeshJson(
            n_v=mesh.n_v,
            n_f=mesh.n_f,
            vertices=[float(x) for x in np.asarray(mesh.vertices, dtype=np.float32).reshape(-1)],
            faces=[int(x) for x in mesh.faces.reshape(-1)],
        )
        return Response(content=body.model_dump_json(), media_type="application/json")
    return Response(content=wire.encode_mesh(mesh), media_type="application/octet-stream")


def create_app(state: SessionState) -> FastAPI:
    app = FastAPI(title="carimorph", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.session = state

    @app.get("/model", response_model=ModelInfo)
    def model_info():
        ratios = state.model.variance_ratios[:10]
        return ModelInfo(
            n_v=state.model.n_v,
            d=state.model.d,
            variance_ratios=[float(x) for x in ratios],
        )

    @app.get("/heads", response_model=HeadsResponse)
    def heads():
        out = []
        for key in sorted(state.slots):
            coeffs = encode(state.model, state.slots[key].cari)
            out.append(HeadInfo(id=key, cari_coeffs=[float(x) for x in coeffs.values]))
        return HeadsResponse(heads=out)

    @app.post("/exaggerate")
    def exaggerate_endpoint(req: ExaggerateRequest, format: str = Query(default="bin")):
        mean = state.mean_head
        try:
            if req.head_id is not None:
                slot = state.slots.get(req.head_id)
                if slot is None:
                    raise HTTPException(status_code=404, detail=f"unknown head {req.head_id!r}")
                d_p = feature_vector(slot.normal, mean, source="dP")
                if req.coeffs is not None:
                    cari = decode(state.model, PcaCoeffs(np.asarray(req.coeffs)))
                    d_g = feature_vector(cari, mean, source="dG")
                else:
                    d_g = feature_vector(slot.cari, mean, source="dG")
            else:
                cari = decode(state.model, PcaCoeffs(np.asarray(req.coeffs)))
                d_g = feature_vector(cari, mean, source="dG")
                d_p = FeatureVector(np.zeros_like(d_g.values), source="dP")
            mesh = user_control(mean, d_g, d_p, req.u1, req.u2)
        except HTTPException:
            raise
        except CarimorphError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _mesh_response(mesh, format)

    @app.get("/mesh/{head_id}")
    def stored_mesh(
        head_id: str,
        side: str = Query(default="cari", pattern="^(cari|normal)$"),
        format: str = Query(default="bin"),
    ):
        slot = state.slots.get(head_id)
        if slot is None:
            raise HTTPException(status_code=404, detail=f"unknown head {head_id!r}")
        return _mesh_response(slot.cari if side == "cari" else slot.normal, format)

    return app


def serve(
    model_path: str | Path,
    mean_path: str | Path,
    head_specs: list[tuple[str, str, str]] | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
) -> None:
    """Load the session from files and run the service until interrupted."""
    import uvicorn

    state = load_session(model_path, mean_path, head_specs)
    logger.info(
        "serving model with n_v=%d d=%d and %d head slot(s) on %s:%d",
        state.model.n_v, state.model.d, len(state.slots), host, port,
    )
    uvicorn.run(create_app(state), host=host, port=port, log_level="info")
