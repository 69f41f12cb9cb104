"""Local HTTP service exposing sessions, graph edits and image generation.

Sessions live in memory; per-session operations are serialized by a lock
while the frozen model weights are shared. Generated images are cached by
a digest of (graph state, occlusions, seed), so re-generating an
unchanged session returns the cached bytes. The one-shot edit pipeline
below is the exact code path the `edit` CLI uses, which keeps CLI and
service outputs byte-identical.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .data import DatasetIndex
from .graph import (EditError, MaskSpec, SceneGraph, apply_edit, edit_from_dict,
                    edit_to_dict, graph_from_dict, graph_to_dict, validate_graph)
from .image_io import from_uint8, png_bytes
from .model import ManipulationModel


def merge_masks(acc: MaskSpec, new: MaskSpec) -> MaskSpec:
    """Cumulative image-side masking across a session's edits.

    Node-level masking lives in the graph flags apply_edit sets, so only
    the occlusion regions accumulate here (index sets would go stale as
    removals renumber nodes).
    """
    return MaskSpec(occlude_regions=list(acc.occlude_regions) + list(new.occlude_regions),
                    fully_generative=acc.fully_generative or new.fully_generative)


def run_edit_pipeline(model: ManipulationModel, image, graph: SceneGraph,
                      ops, seed: int = 0):
    """Apply a list of edits and synthesize; shared by the service and the CLI."""
    g = graph
    mask = MaskSpec()
    for op in ops:
        g, spec = apply_edit(g, op)
        mask = merge_masks(mask, spec)
    state = model.generate(image, g, mask, seed=seed, occlude_predicted=True)
    return state, g, mask


def mask_summary(mask: MaskSpec) -> dict:
    return {
        "nodes_feature_masked": sorted(mask.nodes_feature_masked),
        "nodes_bbox_masked": sorted(mask.nodes_bbox_masked),
        "occlude_regions": [list(r) for r in mask.occlude_regions],
        "fully_generative": mask.fully_generative,
    }


@dataclass
class Session:
    id: str
    source_image: np.ndarray
    pristine: SceneGraph
    graph: SceneGraph
    mask: MaskSpec = field(default_factory=MaskSpec)
    history: list = field(default_factory=list)
    seed: int = 0
    cache: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def digest(self) -> str:
        payload = json.dumps({
            "graph": graph_to_dict(self.graph),
            "regions": [list(r) for r in self.mask.occlude_regions],
            "fully": self.mask.fully_generative,
            "seed": self.seed,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:24]


def create_app(model: Optional[ManipulationModel], dataset: Optional[DatasetIndex] = None,
               frontend_dir=None, base_seed: int = 0) -> FastAPI:
    app = FastAPI(title="sgedit")
    sessions: dict[str, Session] = {}
    images: dict[str, bytes] = {}
    reseed_rng = np.random.default_rng(base_seed + 1)
    state_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(404, f"no session {session_id}")
        return s

    def session_view(s: Session) -> dict:
        return {"id": s.id, "graph": graph_to_dict(s.graph),
                "history": [edit_to_dict(e) for e in s.history],
                "mask": mask_summary(s.mask), "seed": s.seed}

    def vocab_sizes():
        if dataset is not None:
            return len(dataset.objects), len(dataset.predicates)
        if model is not None:
            return model.config.n_objects, model.config.n_predicates
        return None

    @app.post("/api/sessions")
    def create_session(payload: dict = Body(...)):
        if "sample_id" in payload:
            if dataset is None:
                raise HTTPException(400, "service started without a dataset")
            try:
                image, graph = dataset.load_source(str(payload["sample_id"]))
            except KeyError:
                raise HTTPException(404, f"unknown sample {payload['sample_id']}")
        elif "image" in payload and "graph" in payload:
            try:
                raw = base64.b64decode(payload["image"])
                with Image.open(io.BytesIO(raw)) as im:
                    image = from_uint8(np.asarray(im.convert("RGB")))
            except Exception as e:
                raise HTTPException(400, f"could not decode image: {e}")
            try:
                graph = graph_from_dict(payload["graph"])
            except (KeyError, TypeError, ValueError) as e:
                raise HTTPException(400, f"malformed graph JSON: {e}")
            sizes = vocab_sizes()
            if sizes is not None:
                violations = validate_graph(graph, sizes)
                if violations:
                    raise HTTPException(400, {"validation": violations})
        else:
            raise HTTPException(400, "expected sample_id or image+graph")
        if model is not None and image.shape[-1] != model.config.image_size:
            raise HTTPException(400, f"image resolution {image.shape[-1]} != model "
                                     f"{model.config.image_size}")
        s = Session(id=uuid.uuid4().hex[:12], source_image=image,
                    pristine=graph.copy(), graph=graph, seed=base_seed)
        src_id = f"src-{s.id}"
        with state_lock:
            images[src_id] = png_bytes(image)
            sessions[s.id] = s
        return {**session_view(s), "source_image_id": src_id}

    @app.get("/api/sessions/{session_id}")
    def read_session(session_id: str):
        return session_view(get_session(session_id))

    @app.post("/api/sessions/{session_id}/edits")
    def post_edit(session_id: str, payload: dict = Body(...)):
        s = get_session(session_id)
        with s.lock:
            try:
                op = edit_from_dict(payload)
                new_graph, spec = apply_edit(s.graph, op)
            except (EditError, KeyError, TypeError, ValueError) as e:
                raise HTTPException(400, f"edit rejected: {e}")
            s.graph = new_graph
            s.mask = merge_masks(s.mask, spec)
            s.history.append(op)
            return {**session_view(s), "edit_mask": mask_summary(spec)}

    @app.post("/api/sessions/{session_id}/generate")
    def generate(session_id: str, payload: dict = Body(default={})):
        if model is None:
            raise HTTPException(503, "no checkpoint loaded")
        s = get_session(session_id)
        with s.lock:
            if payload.get("reseed"):
                s.seed = int(reseed_rng.integers(2 ** 31))
            digest = s.digest()
            cached = digest in s.cache
            if not cached:
                state = model.generate(s.source_image, s.graph, s.mask,
                                       seed=s.seed, occlude_predicted=True)
                image_id = f"gen-{digest}"
                with state_lock:
                    images[image_id] = png_bytes(state.generated)
                s.cache[digest] = image_id
            return {"image_id": s.cache[digest], "cached": cached, "seed": s.seed}

    @app.get("/api/images/{image_id}.png")
    def get_image(image_id: str):
        data = images.get(image_id)
        if data is None:
            raise HTTPException(404, f"unknown image {image_id}")
        return Response(content=data, media_type="image/png")

    @app.get("/api/samples")
    def samples(split: str = "test"):
        if dataset is None:
            raise HTTPException(404, "service started without a dataset")
        return {"split": split,
                "samples": [{"id": sid, "kind": dataset.entry(sid)["kind"]}
                            for sid in dataset.ids(split)]}

    @app.get("/api/vocab")
    def vocab():
        if dataset is not None:
            return {"objects": dataset.objects, "predicates": dataset.predicates}
        if model is not None:
            meta = getattr(model, "vocab", None)
            if meta:
                return meta
        raise HTTPException(404, "no vocabulary available")

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app
