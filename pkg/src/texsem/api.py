"""HTTP service exposing the pipeline to the web UI.

Endpoints:
  GET  /api/attributes          vocabulary with per-attribute axis group
  POST /api/generate            texture from an attribute->value mapping
  GET  /api/texture/{id}.png    content-addressed generated images

Generated image ids are the SHA-256 of (tag, seed, size), so identical
requests are served from the same immutable file and responses stay pure
functions of the loaded artifacts and the request body.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import features as features_mod
from . import ldl, manifold, semspace
from .core import InvalidInputError, VOCABULARY, write_png

_AXIS_LETTERS = ("X", "Y", "Z")

MAX_GENERATE_SIZE = 512


@dataclass
class ApiState:
    space: semspace.SemanticSpace
    predictor: ldl.MaxEntModel
    bank: features_mod.GaborBank
    image_dir: Path
    default_size: int
    axis_of_attribute: list[str]
    request_count: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def bump(self) -> int:
        with self._lock:
            self.request_count += 1
            return self.request_count


def _axis_labels(d: int) -> list[str]:
    return [_AXIS_LETTERS[a] if a < 3 else f"A{a + 1}" for a in range(d)]


def build_state(space: semspace.SemanticSpace, predictor: ldl.MaxEntModel,
                image_dir, default_size: int = 128,
                bank: Optional[features_mod.GaborBank] = None) -> ApiState:
    """Load artifacts and precompute per-attribute axis groups."""
    bank = bank or features_mod.build_bank()
    corr, _ = manifold.axis_attribute_correlations(space.embedding)
    labels = _axis_labels(space.embedding.d)
    axis_of_attribute = [labels[int(np.argmax(np.abs(row)))] for row in corr]
    image_dir = Path(image_dir)
    image_dir.mkdir(parents=True, exist_ok=True)
    return ApiState(
        space=space,
        predictor=predictor,
        bank=bank,
        image_dir=image_dir,
        default_size=default_size,
        axis_of_attribute=axis_of_attribute,
    )


def _image_id(tag, size: int) -> str:
    key = json.dumps(
        {"model_id": tag.model_id, "params": list(tag.params), "seed": tag.seed,
         "size": size},
        sort_keys=True,
    )
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:24]


def _store_image(state: ApiState, image, image_id: str) -> Path:
    """Append-only, atomic write; rewriting an existing id is a no-op."""
    path = state.image_dir / f"{image_id}.png"
    if path.exists():
        return path
    tmp = state.image_dir / f".{image_id}.tmp-{os.getpid()}"
    write_png(image, tmp)
    os.replace(tmp, path)
    return path


def create_app(state: ApiState, ui_dir=None) -> FastAPI:
    app = FastAPI(title="texsem", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(InvalidInputError)
    async def _invalid_input(request: Request, exc: InvalidInputError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/api/attributes")
    def attributes():
        return {
            "attributes": [
                {"name": name, "index": i, "axis": state.axis_of_attribute[i]}
                for i, name in enumerate(VOCABULARY.names)
            ]
        }

    @app.post("/api/generate")
    def generate(body: dict):
        mapping = body.get("attributes")
        if not isinstance(mapping, dict) or not mapping:
            raise InvalidInputError("body must include a non-empty 'attributes' object")
        size = int(body.get("size", state.default_size))
        if not (16 <= size <= MAX_GENERATE_SIZE):
            raise InvalidInputError(
                f"size must be within [16, {MAX_GENERATE_SIZE}], got {size}"
            )
        top_k = int(body.get("top_k", 1))
        if not (1 <= top_k <= 20):
            raise InvalidInputError(f"top_k must be within [1, 20], got {top_k}")
        query = semspace.query_from_mapping(mapping)

        result = semspace.generate_from_description(state.space, query, size)
        neighbors = semspace.top_neighbors(state.space, query, top_k)
        mse = semspace.closed_loop_mse(query, result, state.predictor, state.bank)
        image_id = _image_id(result.tag, size)
        _store_image(state, result.image, image_id)
        state.bump()
        return {
            "image_url": f"/api/texture/{image_id}.png",
            "tag": {
                "model_id": result.tag.model_id,
                "params": list(result.tag.params),
                "seed": result.tag.seed,
            },
            "neighbor_id": result.neighbor_id,
            "neighbor_distance": result.neighbor_distance,
            "neighbors": [
                {
                    "id": sample.id,
                    "model_id": sample.tag.model_id,
                    "distance": dist,
                }
                for sample, dist in neighbors
            ],
            "closed_loop_mse": mse,
            "query_point": [float(v) for v in result.query_point],
        }

    @app.get("/api/texture/{image_id}.png")
    def texture(image_id: str):
        if not image_id.isalnum():
            raise HTTPException(status_code=404, detail="unknown texture id")
        path = state.image_dir / f"{image_id}.png"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="unknown texture id")
        return FileResponse(
            path,
            media_type="image/png",
            headers={"Cache-Control": "public, max-age=31536000, immutable"},
        )

    if ui_dir:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
