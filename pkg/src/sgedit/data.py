"""Reading exported datasets: manifest, vocabularies, samples."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import EditOp, SceneGraph, edit_from_dict, graph_from_dict
from .image_io import load_png


@dataclass
class PairSample:
    sample_id: str
    kind: str
    edit: EditOp
    source_image: np.ndarray
    source_graph: SceneGraph
    target_image: np.ndarray
    target_graph: SceneGraph


class DatasetIndex:
    def __init__(self, root):
        self.root = Path(root)
        self.manifest = json.loads((self.root / "manifest.json").read_text())
        self.objects = json.loads((self.root / self.manifest["vocab_objects"]).read_text())
        self.predicates = json.loads((self.root / self.manifest["vocab_predicates"]).read_text())
        self._by_id = {s["id"]: s for s in self.manifest["samples"]}

    @property
    def resolution(self) -> int:
        return int(self.manifest["resolution"])

    def ids(self, split: str | None = None, kind: str | None = None) -> list[str]:
        out = []
        for s in self.manifest["samples"]:
            if split is not None and s["split"] != split:
                continue
            if kind is not None and s["kind"] != kind:
                continue
            out.append(s["id"])
        return out

    def entry(self, sample_id: str) -> dict:
        return self._by_id[sample_id]

    def load_graph(self, rel_path: str) -> SceneGraph:
        return graph_from_dict(json.loads((self.root / rel_path).read_text()))

    def load_source(self, sample_id: str):
        """The (image, graph) pair self-supervised training is allowed to see."""
        e = self._by_id[sample_id]
        return load_png(self.root / e["source_image"]), self.load_graph(e["source_graph"])

    def load_pair(self, sample_id: str) -> PairSample:
        e = self._by_id[sample_id]
        return PairSample(
            sample_id=sample_id,
            kind=e["kind"],
            edit=edit_from_dict(e["edit"]),
            source_image=load_png(self.root / e["source_image"]),
            source_graph=self.load_graph(e["source_graph"]),
            target_image=load_png(self.root / e["target_image"]),
            target_graph=self.load_graph(e["target_graph"]),
        )
