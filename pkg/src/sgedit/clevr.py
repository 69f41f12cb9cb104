"""Procedural 2D scene sampler, rasterizer and paired-edit generator.

Scenes hold 3..7 colored shapes on a gray background. Categories encode
the (shape, color, size) combination; predicates encode relative position
on the horizontal axis (left of / right of) or the depth axis mapped to
the vertical (in front of / behind, larger cy drawn nearer and later).
Each exported sample pairs a source scene with a minimally edited target
scene, both rendered, plus their graphs and the connecting edit op.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import graph as G
from .image_io import from_uint8, save_png

SHAPES = ("square", "circle", "triangle")
COLORS = {
    "gray": (87, 87, 87),
    "red": (173, 35, 35),
    "blue": (42, 75, 215),
    "green": (29, 105, 20),
    "brown": (129, 74, 25),
    "purple": (129, 38, 192),
    "cyan": (41, 208, 208),
    "yellow": (255, 238, 51),
}
COLOR_NAMES = tuple(COLORS)
SIZES = ("small", "large")
HALF_EXTENT = {"small": 0.055, "large": 0.10}
BACKGROUND = (180, 180, 180)

PREDICATES = ("left of", "right of", "in front of", "behind")
HORIZONTAL = ("left of", "right of")
DEPTH = ("in front of", "behind")

POSITION_MARGIN = 0.12
MIN_CENTER_DIST = 0.24
SUPERSAMPLE = 4


def object_vocab() -> list[str]:
    return [f"{size} {color} {shape}"
            for shape in SHAPES for color in COLOR_NAMES for size in SIZES]


def predicate_vocab() -> list[str]:
    return list(PREDICATES)


def category_id(shape: str, color: str, size: str) -> int:
    return (SHAPES.index(shape) * len(COLOR_NAMES) + COLOR_NAMES.index(color)) * 2 \
        + SIZES.index(size)


@dataclass
class SceneObject:
    shape: str
    color: str
    size: str
    cx: float
    cy: float

    @property
    def half_extent(self) -> float:
        return HALF_EXTENT[self.size]

    @property
    def bbox(self) -> G.Box:
        he = self.half_extent
        return (self.cy - he, self.cx - he, self.cy + he, self.cx + he)

    @property
    def category_id(self) -> int:
        return category_id(self.shape, self.color, self.size)


@dataclass
class SceneSpec:
    objects: list[SceneObject] = field(default_factory=list)


class InfeasibleEdit(Exception):
    """Requested edit kind cannot be realized on this scene."""


def _sample_position(rng, existing, tries=200):
    for _ in range(tries):
        cx, cy = rng.uniform(POSITION_MARGIN, 1.0 - POSITION_MARGIN, size=2)
        if all(np.hypot(cx - o.cx, cy - o.cy) >= MIN_CENTER_DIST for o in existing):
            return float(cx), float(cy)
    return None


def sample_scene(rng: np.random.Generator, min_objects=3, max_objects=7,
                 restarts=50) -> SceneSpec:
    """Uniformly sample shapes/colors/sizes; rejection-sample non-colliding centers."""
    attempts = 0
    for _ in range(restarts):
        n = int(rng.integers(min_objects, max_objects + 1))
        objects = []
        ok = True
        for _ in range(n):
            pos = _sample_position(rng, objects)
            attempts += 1
            if pos is None:
                ok = False
                break
            objects.append(SceneObject(
                shape=SHAPES[rng.integers(len(SHAPES))],
                color=COLOR_NAMES[rng.integers(len(COLOR_NAMES))],
                size=SIZES[rng.integers(len(SIZES))],
                cx=pos[0], cy=pos[1]))
        if ok:
            return SceneSpec(objects=objects)
    raise RuntimeError(f"scene sampling rejected after {attempts} placement attempts")


def rasterize(scene: SceneSpec, res: int = 64):
    """Anti-aliased render (supersampled) plus analytic per-object boxes.

    Painter order is back to front: larger cy means nearer, drawn later.
    Returns ((3, res, res) float32 image in [0, 1], list of normalized boxes).
    """
    big = res * SUPERSAMPLE
    img = Image.new("RGB", (big, big), BACKGROUND)
    draw = ImageDraw.Draw(img)
    for obj in sorted(scene.objects, key=lambda o: o.cy):
        he = obj.half_extent * big
        cx, cy = obj.cx * big, obj.cy * big
        color = COLORS[obj.color]
        if obj.shape == "square":
            draw.rectangle((cx - he, cy - he, cx + he, cy + he), fill=color)
        elif obj.shape == "circle":
            draw.ellipse((cx - he, cy - he, cx + he, cy + he), fill=color)
        else:
            draw.polygon([(cx, cy - he), (cx + he, cy + he), (cx - he, cy + he)], fill=color)
    img = img.resize((res, res), Image.BOX)
    boxes = [obj.bbox for obj in scene.objects]
    return from_uint8(np.asarray(img)), boxes


def _scene_digest(scene: SceneSpec) -> int:
    payload = json.dumps(
        [[o.shape, o.color, o.size, round(o.cx, 9), round(o.cy, 9)] for o in scene.objects])
    return int.from_bytes(hashlib.sha256(payload.encode()).digest()[:8], "little")


def predicate_between(scene: SceneSpec, subject: int, obj: int, axis: str) -> str:
    s, o = scene.objects[subject], scene.objects[obj]
    if axis == "horizontal":
        return "left of" if s.cx < o.cx else "right of"
    return "in front of" if s.cy > o.cy else "behind"


def axis_of(predicate: str) -> str:
    return "horizontal" if predicate in HORIZONTAL else "depth"


def _nearest_pairs(scene: SceneSpec, rank=2):
    centers = np.array([[o.cx, o.cy] for o in scene.objects])
    pairs = []
    for i in range(len(centers)):
        d = np.hypot(*(centers - centers[i]).T)
        d[i] = np.inf
        for j in np.argsort(d, kind="stable")[:rank]:
            pairs.append((i, int(j)))
    return pairs


def derive_graph(scene: SceneSpec, rng: np.random.Generator | None = None,
                 image_ref: str | None = None) -> G.SceneGraph:
    """Graph with one node per object and a sparse set of positional edges.

    Each object relates to its two nearest neighbours; the axis of each
    edge is drawn at random (reproducibly from the scene itself when no
    rng is given) and the predicate follows from the geometry.
    """
    if rng is None:
        rng = np.random.default_rng(_scene_digest(scene))
    nodes = [G.ObjectNode(
        category_id=o.category_id, bbox=o.bbox,
        attributes={"shape": o.shape, "color": o.color, "size": o.size})
        for o in scene.objects]
    edges = []
    seen = set()
    for i, j in _nearest_pairs(scene):
        axis = "horizontal" if rng.random() < 0.5 else "depth"
        pred = predicate_between(scene, i, j, axis)
        triple = (i, PREDICATES.index(pred), j)
        if triple in seen:
            continue
        seen.add(triple)
        edges.append(G.RelationEdge(*triple))
        if len(edges) >= 2 * len(scene.objects):
            break
    return G.SceneGraph(nodes=nodes, edges=edges, image_ref=image_ref)


@dataclass
class EditPairSample:
    source_scene: SceneSpec
    target_scene: SceneSpec
    source_graph: G.SceneGraph
    target_graph: G.SceneGraph
    edit: G.EditOp
    kind: str


def _graph_with(scene: SceneSpec, base: G.SceneGraph, edges=None) -> G.SceneGraph:
    """Rebuild GT node data from a scene while keeping base's edge structure."""
    g = G.SceneGraph(
        nodes=[G.ObjectNode(category_id=o.category_id, bbox=o.bbox,
                            attributes={"shape": o.shape, "color": o.color, "size": o.size})
               for o in scene.objects],
        edges=[G.RelationEdge(*e.triple()) for e in (edges if edges is not None else base.edges)],
        image_ref=None)
    return g


def make_edit_pair(scene: SceneSpec, kind: str, rng: np.random.Generator) -> EditPairSample:
    """Derive a (source, target) scene pair differing by exactly one edit."""
    source_graph = derive_graph(scene, rng)
    n = len(scene.objects)

    if kind == "remove":
        if n < 4:
            raise InfeasibleEdit("removal needs at least 4 objects")
        idx = int(rng.integers(n))
        target_scene = SceneSpec([o for k, o in enumerate(scene.objects) if k != idx])
        edited, _ = G.apply_edit(source_graph, G.RemoveNode(idx))
        target_graph = _graph_with(target_scene, edited, edges=edited.edges)
        return EditPairSample(scene, target_scene, source_graph, target_graph,
                              G.RemoveNode(idx), kind)

    if kind == "attribute":
        idx = int(rng.integers(n))
        obj = scene.objects[idx]
        choices = [c for c in COLOR_NAMES if c != obj.color]
        new_color = choices[int(rng.integers(len(choices)))]
        new_obj = SceneObject(obj.shape, new_color, obj.size, obj.cx, obj.cy)
        target_scene = SceneSpec([new_obj if k == idx else o
                                  for k, o in enumerate(scene.objects)])
        target_graph = _graph_with(target_scene, source_graph)
        return EditPairSample(scene, target_scene, source_graph, target_graph,
                              G.ReplaceCategory(idx, new_obj.category_id), kind)

    if kind == "add":
        if n >= 7:
            raise InfeasibleEdit("addition would exceed 7 objects")
        pos = _sample_position(rng, scene.objects)
        if pos is None:
            raise InfeasibleEdit("no collision-free position for a new object")
        new_obj = SceneObject(
            shape=SHAPES[rng.integers(len(SHAPES))],
            color=COLOR_NAMES[rng.integers(len(COLOR_NAMES))],
            size=SIZES[rng.integers(len(SIZES))],
            cx=pos[0], cy=pos[1])
        target_scene = SceneSpec(list(scene.objects) + [new_obj])
        # connect the new node to its two nearest neighbours
        dists = [np.hypot(new_obj.cx - o.cx, new_obj.cy - o.cy) for o in scene.objects]
        new_edges = []
        extra = []
        for j in np.argsort(dists, kind="stable")[:2]:
            j = int(j)
            axis = "horizontal" if rng.random() < 0.5 else "depth"
            direction = "out" if rng.random() < 0.5 else "in"
            if direction == "out":
                pred = predicate_between(target_scene, n, j, axis)
                extra.append(G.RelationEdge(n, PREDICATES.index(pred), j))
            else:
                pred = predicate_between(target_scene, j, n, axis)
                extra.append(G.RelationEdge(j, PREDICATES.index(pred), n))
            new_edges.append(G.NewEdge(PREDICATES.index(pred), j, direction))
        target_graph = _graph_with(target_scene, source_graph,
                                   edges=list(source_graph.edges) + extra)
        return EditPairSample(scene, target_scene, source_graph, target_graph,
                              G.AddNode(new_obj.category_id, new_edges), kind)

    if kind == "swap":
        # pairs joined by exactly one edge whose swap flips no third-party edge
        by_pair = {}
        for k, e in enumerate(source_graph.edges):
            key = frozenset((e.subject_index, e.object_index))
            by_pair.setdefault(key, []).append(k)
        candidates = [(key, ks[0]) for key, ks in by_pair.items() if len(ks) == 1]
        order = rng.permutation(len(candidates))
        for pick in order:
            key, edge_idx = candidates[int(pick)]
            a, b = sorted(key)
            swapped = []
            for k, o in enumerate(scene.objects):
                if k == a:
                    src = scene.objects[b]
                elif k == b:
                    src = scene.objects[a]
                else:
                    src = o
                swapped.append(SceneObject(o.shape, o.color, o.size, src.cx, src.cy))
            target_scene = SceneSpec(swapped)
            ok = True
            new_edges = []
            for k, e in enumerate(source_graph.edges):
                pred = PREDICATES[e.predicate_id]
                expected = predicate_between(target_scene, e.subject_index,
                                             e.object_index, axis_of(pred))
                if k == edge_idx:
                    if expected == pred or (e.subject_index, PREDICATES.index(expected),
                                            e.object_index) in {x.triple() for x in source_graph.edges}:
                        ok = False
                        break
                    new_edges.append(G.RelationEdge(e.subject_index,
                                                    PREDICATES.index(expected),
                                                    e.object_index))
                else:
                    if expected != pred:
                        ok = False
                        break
                    new_edges.append(G.RelationEdge(*e.triple()))
            if not ok:
                continue
            target_graph = _graph_with(target_scene, source_graph, edges=new_edges)
            edit = G.ChangePredicate(edge_idx, new_edges[edge_idx].predicate_id)
            return EditPairSample(scene, target_scene, source_graph, target_graph,
                                  edit, kind)
        raise InfeasibleEdit("no swappable pair keeps the remaining edges valid")

    raise ValueError(f"unknown edit kind {kind!r}")


EDIT_KINDS = ("swap", "add", "remove", "attribute")


def export_dataset(count: int, out_dir, seed: int, res: int = 64,
                   kinds=EDIT_KINDS) -> dict:
    """Write paired samples, graphs, vocabularies and the split manifest."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "graphs").mkdir(parents=True, exist_ok=True)
    (out / "vocab_objects.json").write_text(json.dumps(object_vocab(), indent=2))
    (out / "vocab_predicates.json").write_text(json.dumps(predicate_vocab(), indent=2))

    samples = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        pair = None
        for _ in range(100):
            scene = sample_scene(rng)
            kind = kinds[int(rng.integers(len(kinds)))]
            try:
                pair = make_edit_pair(scene, kind, rng)
                break
            except InfeasibleEdit:
                continue
        if pair is None:
            raise RuntimeError(f"sample {i}: no feasible edit in 100 attempts")

        sid = f"{i:05d}"
        src_img, _ = rasterize(pair.source_scene, res)
        tgt_img, _ = rasterize(pair.target_scene, res)
        paths = {
            "source_image": f"images/{sid}_src.png",
            "target_image": f"images/{sid}_tgt.png",
            "source_graph": f"graphs/{sid}_src.json",
            "target_graph": f"graphs/{sid}_tgt.json",
        }
        save_png(src_img, out / paths["source_image"])
        save_png(tgt_img, out / paths["target_image"])
        pair.source_graph.image_ref = paths["source_image"]
        pair.target_graph.image_ref = paths["target_image"]
        (out / paths["source_graph"]).write_text(
            json.dumps(G.graph_to_dict(pair.source_graph), indent=2, sort_keys=True))
        (out / paths["target_graph"]).write_text(
            json.dumps(G.graph_to_dict(pair.target_graph), indent=2, sort_keys=True))
        samples.append({"id": sid, "kind": pair.kind,
                        "edit": G.edit_to_dict(pair.edit), **paths})

    n_train = round(count * 0.8)
    n_val = round(count * 0.1)
    for i, s in enumerate(samples):
        s["split"] = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
    manifest = {
        "seed": seed,
        "count": count,
        "resolution": res,
        "edit_kinds": list(kinds),
        "edge_policy": {"nearest_rank": 2, "cap": "2n", "axes": "random"},
        "vocab_objects": "vocab_objects.json",
        "vocab_predicates": "vocab_predicates.json",
        "splits": {split: [s["id"] for s in samples if s["split"] == split]
                   for split in ("train", "val", "test")},
        "samples": samples,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
