"""Scene graph data model, validation, serialization and edit semantics.

A scene graph is a directed graph of object nodes and predicate edges.
Nodes optionally carry a normalized bounding box, a visual appearance
vector and attribute annotations; masking flags record which of these
are withheld from the model input. Edits (remove / replace / re-relate /
add / reposition) return a new graph plus a MaskSpec describing exactly
what the edit hides.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

Box = tuple[float, float, float, float]  # (top, left, bottom, right), normalized


class EditError(ValueError):
    """Raised when an edit cannot be applied; the input graph is untouched."""


@dataclass
class ObjectNode:
    category_id: int
    bbox: Optional[Box] = None
    visual_feature: Optional[np.ndarray] = None
    attributes: Optional[dict] = None
    feature_masked: bool = False
    bbox_masked: bool = False

    def copy(self) -> "ObjectNode":
        return ObjectNode(
            category_id=self.category_id,
            bbox=tuple(self.bbox) if self.bbox is not None else None,
            visual_feature=None if self.visual_feature is None else self.visual_feature.copy(),
            attributes=copy.deepcopy(self.attributes),
            feature_masked=self.feature_masked,
            bbox_masked=self.bbox_masked,
        )


@dataclass
class RelationEdge:
    subject_index: int
    predicate_id: int
    object_index: int

    def triple(self) -> tuple[int, int, int]:
        return (self.subject_index, self.predicate_id, self.object_index)


@dataclass
class SceneGraph:
    nodes: list[ObjectNode] = field(default_factory=list)
    edges: list[RelationEdge] = field(default_factory=list)
    image_ref: Optional[str] = None

    def copy(self) -> "SceneGraph":
        return SceneGraph(
            nodes=[n.copy() for n in self.nodes],
            edges=[RelationEdge(*e.triple()) for e in self.edges],
            image_ref=self.image_ref,
        )


# --- edits ------------------------------------------------------------------

@dataclass
class RemoveNode:
    node_index: int


@dataclass
class ReplaceCategory:
    node_index: int
    new_category_id: int


@dataclass
class ChangePredicate:
    edge_index: int
    new_predicate_id: int


@dataclass
class NewEdge:
    predicate_id: int
    other_node_index: int
    direction: str  # "out": new node is subject; "in": new node is object


@dataclass
class AddNode:
    category_id: int
    new_edges: list[NewEdge] = field(default_factory=list)


@dataclass
class RepositionNode:
    node_index: int


EditOp = Union[RemoveNode, ReplaceCategory, ChangePredicate, AddNode, RepositionNode]


@dataclass
class MaskSpec:
    """Record of what an edit (or a training draw) hides from the model.

    Occlusion rectangles use the same normalized (top, left, bottom, right)
    convention as node boxes; they are converted to pixels only when an
    image is actually occluded.
    """

    nodes_feature_masked: set[int] = field(default_factory=set)
    nodes_bbox_masked: set[int] = field(default_factory=set)
    occlude_regions: list[Box] = field(default_factory=list)
    fully_generative: bool = False

    def merge(self, other: "MaskSpec") -> "MaskSpec":
        return MaskSpec(
            nodes_feature_masked=self.nodes_feature_masked | other.nodes_feature_masked,
            nodes_bbox_masked=self.nodes_bbox_masked | other.nodes_bbox_masked,
            occlude_regions=list(self.occlude_regions) + list(other.occlude_regions),
            fully_generative=self.fully_generative or other.fully_generative,
        )


# --- validation -------------------------------------------------------------

def validate_graph(g: SceneGraph, vocab_sizes: tuple[int, int]) -> list[str]:
    """Check all type invariants; returns human-readable violations (empty if valid)."""
    n_obj, n_pred = vocab_sizes
    out = []
    for i, node in enumerate(g.nodes):
        if not (0 <= node.category_id < n_obj):
            out.append(f"node {i}: category_id {node.category_id} outside vocabulary of {n_obj}")
        if node.bbox is not None:
            t, l, b, r = node.bbox
            if not (0.0 <= t < b <= 1.0):
                out.append(f"node {i}: bbox vertical extent invalid (top={t}, bottom={b})")
            if not (0.0 <= l < r <= 1.0):
                out.append(f"node {i}: bbox horizontal extent invalid (left={l}, right={r})")
    for k, e in enumerate(g.edges):
        if e.subject_index == e.object_index:
            out.append(f"edge {k}: self-edge on node {e.subject_index}")
        for side, idx in (("subject", e.subject_index), ("object", e.object_index)):
            if not (0 <= idx < len(g.nodes)):
                out.append(f"edge {k}: {side} index {idx} outside node count {len(g.nodes)}")
        if not (0 <= e.predicate_id < n_pred):
            out.append(f"edge {k}: predicate_id {e.predicate_id} outside vocabulary of {n_pred}")
    return out


# --- edit application -------------------------------------------------------

def dedupe_edges(g: SceneGraph, edited_edge_index: int) -> SceneGraph:
    """Collapse every edge identical to g.edges[edited_edge_index] into that one edge."""
    if not (0 <= edited_edge_index < len(g.edges)):
        raise EditError(f"edge index {edited_edge_index} outside edge count {len(g.edges)}")
    out = g.copy()
    kept = out.edges[edited_edge_index].triple()
    edges = []
    for k, e in enumerate(out.edges):
        if k != edited_edge_index and e.triple() == kept:
            continue
        edges.append(e)
    out.edges = edges
    return out


def _require_node(g: SceneGraph, idx: int) -> ObjectNode:
    if not (0 <= idx < len(g.nodes)):
        raise EditError(f"node index {idx} outside node count {len(g.nodes)}")
    return g.nodes[idx]


def apply_edit(g: SceneGraph, e: EditOp) -> tuple[SceneGraph, MaskSpec]:
    """Apply one edit, returning a new graph and the masking it entails.

    The input graph is never mutated; invalid edits raise EditError before
    any change is made.
    """
    if isinstance(e, RemoveNode):
        node = _require_node(g, e.node_index)
        out = g.copy()
        del out.nodes[e.node_index]
        edges = []
        for edge in out.edges:
            if e.node_index in (edge.subject_index, edge.object_index):
                continue
            edges.append(RelationEdge(
                edge.subject_index - (edge.subject_index > e.node_index),
                edge.predicate_id,
                edge.object_index - (edge.object_index > e.node_index),
            ))
        out.edges = edges
        spec = MaskSpec()
        if node.bbox is not None:
            spec.occlude_regions.append(tuple(node.bbox))
        return out, spec

    if isinstance(e, ReplaceCategory):
        node = _require_node(g, e.node_index)
        out = g.copy()
        target = out.nodes[e.node_index]
        target.category_id = e.new_category_id
        if target.visual_feature is not None:
            target.visual_feature = np.zeros_like(target.visual_feature)
        target.feature_masked = True
        # bbox stays as a position anchor; the compositor re-estimates size
        target.bbox_masked = True
        target.attributes = None
        spec = MaskSpec(nodes_feature_masked={e.node_index}, nodes_bbox_masked={e.node_index})
        if node.bbox is not None:
            spec.occlude_regions.append(tuple(node.bbox))
        return out, spec

    if isinstance(e, ChangePredicate):
        if not (0 <= e.edge_index < len(g.edges)):
            raise EditError(f"edge index {e.edge_index} outside edge count {len(g.edges)}")
        # collapse duplicates of the original triple onto the edge being edited
        out = dedupe_edges(g, e.edge_index)
        idx = next(k for k, ed in enumerate(out.edges)
                   if ed.triple() == g.edges[e.edge_index].triple())
        out.edges[idx].predicate_id = e.new_predicate_id
        out = dedupe_edges(out, idx)
        edge = g.edges[e.edge_index]
        spec = MaskSpec(nodes_bbox_masked={edge.subject_index, edge.object_index})
        for i in (edge.subject_index, edge.object_index):
            node = out.nodes[i]
            if node.bbox is not None:
                spec.occlude_regions.append(tuple(node.bbox))
            # positions are re-estimated; visual identity is kept
            node.bbox = None
            node.bbox_masked = True
        return out, spec

    if isinstance(e, AddNode):
        new_index = len(g.nodes)
        for ne in e.new_edges:
            if ne.other_node_index == new_index:
                raise EditError("new-node edge may not reference the new node itself")
            if not (0 <= ne.other_node_index < len(g.nodes)):
                raise EditError(
                    f"new-node edge references node {ne.other_node_index} "
                    f"outside node count {len(g.nodes)}")
            if ne.direction not in ("out", "in"):
                raise EditError(f"unknown edge direction {ne.direction!r}")
        out = g.copy()
        out.nodes.append(ObjectNode(
            category_id=e.category_id, feature_masked=True, bbox_masked=True))
        for ne in e.new_edges:
            if ne.direction == "out":
                out.edges.append(RelationEdge(new_index, ne.predicate_id, ne.other_node_index))
            else:
                out.edges.append(RelationEdge(ne.other_node_index, ne.predicate_id, new_index))
            out = dedupe_edges(out, len(out.edges) - 1)
        spec = MaskSpec(nodes_feature_masked={new_index}, nodes_bbox_masked={new_index})
        return out, spec

    if isinstance(e, RepositionNode):
        node = _require_node(g, e.node_index)
        out = g.copy()
        target = out.nodes[e.node_index]
        spec = MaskSpec(nodes_bbox_masked={e.node_index})
        if node.bbox is not None:
            spec.occlude_regions.append(tuple(node.bbox))
        target.bbox = None
        target.bbox_masked = True
        return out, spec

    raise EditError(f"unknown edit op {type(e).__name__}")


# --- JSON interchange -------------------------------------------------------

def graph_to_dict(g: SceneGraph) -> dict:
    nodes = []
    for n in g.nodes:
        item = {
            "category": n.category_id,
            "bbox": list(n.bbox) if n.bbox is not None else None,
            "feature": None if n.visual_feature is None else [float(v) for v in n.visual_feature],
            "attributes": n.attributes,
        }
        if n.feature_masked:
            item["feature_masked"] = True
        if n.bbox_masked:
            item["bbox_masked"] = True
        nodes.append(item)
    out = {"nodes": nodes, "edges": [list(e.triple()) for e in g.edges]}
    if g.image_ref is not None:
        out["image"] = g.image_ref
    return out


def graph_from_dict(d: dict) -> SceneGraph:
    nodes = []
    for item in d.get("nodes", []):
        feature = item.get("feature")
        nodes.append(ObjectNode(
            category_id=int(item["category"]),
            bbox=tuple(float(v) for v in item["bbox"]) if item.get("bbox") is not None else None,
            visual_feature=None if feature is None else np.asarray(feature, dtype=np.float32),
            attributes=item.get("attributes"),
            feature_masked=bool(item.get("feature_masked", False)),
            bbox_masked=bool(item.get("bbox_masked", False)),
        ))
    edges = [RelationEdge(int(s), int(p), int(o)) for s, p, o in d.get("edges", [])]
    return SceneGraph(nodes=nodes, edges=edges, image_ref=d.get("image"))


def serialize_graph(g: SceneGraph) -> str:
    return json.dumps(graph_to_dict(g))


def deserialize_graph(text: str) -> SceneGraph:
    return graph_from_dict(json.loads(text))


def graphs_equal(a: SceneGraph, b: SceneGraph) -> bool:
    """Structural equality, tolerant of float round-trip through JSON."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    for na, nb in zip(a.nodes, b.nodes):
        if na.category_id != nb.category_id:
            return False
        if (na.bbox is None) != (nb.bbox is None):
            return False
        if na.bbox is not None and not np.allclose(na.bbox, nb.bbox, atol=1e-7):
            return False
        if (na.visual_feature is None) != (nb.visual_feature is None):
            return False
        if na.visual_feature is not None and not np.allclose(
                na.visual_feature, nb.visual_feature, atol=1e-6):
            return False
        if na.attributes != nb.attributes:
            return False
        if (na.feature_masked, na.bbox_masked) != (nb.feature_masked, nb.bbox_masked):
            return False
    for ea, eb in zip(a.edges, b.edges):
        if ea.triple() != eb.triple():
            return False
    return a.image_ref == b.image_ref


# --- edit op JSON -----------------------------------------------------------

def edit_to_dict(e: EditOp) -> dict:
    if isinstance(e, RemoveNode):
        return {"op": "remove_node", "node_index": e.node_index}
    if isinstance(e, ReplaceCategory):
        return {"op": "replace_category", "node_index": e.node_index,
                "new_category_id": e.new_category_id}
    if isinstance(e, ChangePredicate):
        return {"op": "change_predicate", "edge_index": e.edge_index,
                "new_predicate_id": e.new_predicate_id}
    if isinstance(e, AddNode):
        return {"op": "add_node", "category_id": e.category_id,
                "new_edges": [{"predicate_id": ne.predicate_id,
                               "other_node_index": ne.other_node_index,
                               "direction": ne.direction} for ne in e.new_edges]}
    if isinstance(e, RepositionNode):
        return {"op": "reposition_node", "node_index": e.node_index}
    raise EditError(f"unknown edit op {type(e).__name__}")


def edit_from_dict(d: dict) -> EditOp:
    op = d.get("op")
    if op == "remove_node":
        return RemoveNode(int(d["node_index"]))
    if op == "replace_category":
        return ReplaceCategory(int(d["node_index"]), int(d["new_category_id"]))
    if op == "change_predicate":
        return ChangePredicate(int(d["edge_index"]), int(d["new_predicate_id"]))
    if op == "add_node":
        edges = [NewEdge(int(ne["predicate_id"]), int(ne["other_node_index"]),
                         str(ne["direction"])) for ne in d.get("new_edges", [])]
        return AddNode(int(d["category_id"]), edges)
    if op == "reposition_node":
        return RepositionNode(int(d["node_index"]))
    raise EditError(f"unknown edit op {op!r}")
