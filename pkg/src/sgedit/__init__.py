"""sgedit: semantic image manipulation from scene graphs."""

from .graph import (AddNode, ChangePredicate, EditError, MaskSpec, NewEdge,
                    ObjectNode, RelationEdge, RemoveNode, ReplaceCategory,
                    RepositionNode, SceneGraph, apply_edit, dedupe_edges,
                    deserialize_graph, serialize_graph, validate_graph)
from .model import ManipulationModel, ModelConfig, preset_config

__all__ = [
    "AddNode", "ChangePredicate", "EditError", "MaskSpec", "NewEdge",
    "ObjectNode", "RelationEdge", "RemoveNode", "ReplaceCategory",
    "RepositionNode", "SceneGraph", "apply_edit", "dedupe_edges",
    "deserialize_graph", "serialize_graph", "validate_graph",
    "ManipulationModel", "ModelConfig", "preset_config",
]

__version__ = "0.1.0"
