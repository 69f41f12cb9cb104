"""Spatio-semantic scene graph network.

Each node enters as the concatenation of its category embedding, box
coordinates and visual feature (masked parts zeroed). A stack of edge
message layers and mean-aggregating node updates produces one latent per
node, from which three heads predict a box, a coarse spatial mask and a
feature vector used to paint the scene layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .graph import MaskSpec, SceneGraph

LEAKY_SLOPE = 0.2


def mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, hidden),
        nn.LeakyReLU(LEAKY_SLOPE),
        nn.Linear(hidden, out_dim),
    )


class EmbeddingTable(nn.Module):
    """Learned category and predicate embeddings."""

    def __init__(self, n_objects, n_predicates, embed_dim=128):
        super().__init__()
        self.objects = nn.Embedding(n_objects, embed_dim)
        self.predicates = nn.Embedding(n_predicates, embed_dim)


@dataclass
class SGNOutput:
    boxes: torch.Tensor     # (N, 4) normalized (top, left, bottom, right), unclamped
    masks: torch.Tensor     # (N, M, M) in (0, 1)
    features: torch.Tensor  # (N, s)


class SceneGraphNet(nn.Module):
    """Message passing over predicate edges followed by per-node output heads."""

    def __init__(self, n_objects, n_predicates, embed_dim=128, feature_dim=128,
                 node_out_dim=128, mask_size=16, hidden_dim=512, msg_dim=128,
                 head_hidden=128, num_layers=5):
        super().__init__()
        if num_layers < 1:
            raise ValueError("need at least one message passing layer")
        self.embeddings = EmbeddingTable(n_objects, n_predicates, embed_dim)
        self.feature_dim = feature_dim
        self.mask_size = mask_size
        self.msg_dim = msg_dim
        self.num_layers = num_layers

        node0 = embed_dim + 4 + feature_dim
        node_widths = [node0] + [msg_dim] * num_layers
        edge_widths = [embed_dim] + [msg_dim] * num_layers
        self.edge_mlps = nn.ModuleList(
            mlp(2 * node_widths[t] + edge_widths[t], hidden_dim, 3 * msg_dim)
            for t in range(num_layers))
        self.node_mlps = nn.ModuleList(
            mlp(msg_dim, hidden_dim, msg_dim) for _ in range(num_layers))
        # carries isolated nodes (no incident edges) past the width change at layer 0
        self.isolated_proj = nn.Linear(node0, msg_dim)

        self.box_head = mlp(msg_dim, head_hidden, 4)
        self.mask_head = nn.Linear(msg_dim, mask_size * mask_size)
        self.feature_head = nn.Linear(msg_dim, node_out_dim)

    @property
    def dtype(self):
        return self.isolated_proj.weight.dtype

    def init_node_states(self, g: SceneGraph, mask_spec: MaskSpec | None = None,
                         phi: torch.Tensor | None = None) -> torch.Tensor:
        """Layer-0 node states: concat(category embedding, box or zeros, phi or zeros).

        `phi` optionally overrides the per-node visual features stored on the
        graph (the training path extracts them from image crops with gradient).
        """
        n = len(g.nodes)
        dev, dt = self.isolated_proj.weight.device, self.dtype
        cats = torch.tensor([node.category_id for node in g.nodes], dtype=torch.long, device=dev)
        if cats.numel() and int(cats.max()) >= self.embeddings.objects.num_embeddings:
            raise ValueError("category id outside object vocabulary")
        emb = self.embeddings.objects(cats)

        boxes = torch.zeros(n, 4, dtype=dt, device=dev)
        feats = torch.zeros(n, self.feature_dim, dtype=dt, device=dev)
        for i, node in enumerate(g.nodes):
            bbox_off = node.bbox_masked or node.bbox is None or (
                mask_spec is not None and i in mask_spec.nodes_bbox_masked)
            if not bbox_off:
                boxes[i] = torch.tensor(node.bbox, dtype=dt, device=dev)
            feat_off = node.feature_masked or (
                mask_spec is not None and i in mask_spec.nodes_feature_masked)
            if not feat_off:
                if phi is not None:
                    feats[i] = phi[i]
                elif node.visual_feature is not None:
                    feats[i] = torch.as_tensor(
                        np.asarray(node.visual_feature), dtype=dt, device=dev)
        return torch.cat([emb, boxes, feats], dim=1)

    def init_edge_states(self, g: SceneGraph) -> torch.Tensor:
        dev = self.isolated_proj.weight.device
        preds = torch.tensor([e.predicate_id for e in g.edges], dtype=torch.long, device=dev)
        if preds.numel() and int(preds.max()) >= self.embeddings.predicates.num_embeddings:
            raise ValueError("predicate id outside predicate vocabulary")
        return self.embeddings.predicates(preds)

    def edge_message(self, layer: int, nu_i: torch.Tensor, rho: torch.Tensor,
                     nu_j: torch.Tensor):
        """One edge update: perceptron over (subject, relation, object) states,
        split into the subject message, the updated relation state and the
        object message."""
        out = self.edge_mlps[layer](torch.cat([nu_i, rho, nu_j], dim=-1))
        alpha, rho_new, beta = out.split(self.msg_dim, dim=-1)
        return alpha, rho_new, beta

    def aggregate_nodes(self, layer: int, nu: torch.Tensor, alpha: torch.Tensor,
                        beta: torch.Tensor, subj: torch.Tensor, obj: torch.Tensor):
        """Mean of incoming/outgoing messages per node, then the node perceptron.

        Nodes with no incident edges bypass the mean: at layer 0 they pass
        through a learned projection onto the message width, afterwards they
        keep their state unchanged.
        """
        n = nu.shape[0]
        sums = nu.new_zeros(n, self.msg_dim)
        counts = nu.new_zeros(n)
        if alpha.shape[0]:
            sums.index_add_(0, subj, alpha)
            sums.index_add_(0, obj, beta)
            ones = nu.new_ones(alpha.shape[0])
            counts.index_add_(0, subj, ones)
            counts.index_add_(0, obj, ones)
        updated = self.node_mlps[layer](sums / counts.clamp(min=1.0).unsqueeze(1))
        carried = self.isolated_proj(nu) if layer == 0 else nu
        return torch.where((counts == 0).unsqueeze(1), carried, updated)

    def forward(self, g: SceneGraph, mask_spec: MaskSpec | None = None,
                phi: torch.Tensor | None = None) -> SGNOutput:
        nu = self.init_node_states(g, mask_spec, phi)
        rho = self.init_edge_states(g)
        dev = nu.device
        subj = torch.tensor([e.subject_index for e in g.edges], dtype=torch.long, device=dev)
        obj = torch.tensor([e.object_index for e in g.edges], dtype=torch.long, device=dev)
        for t in range(self.num_layers):
            if len(g.edges):
                alpha, rho, beta = self.edge_message(t, nu[subj], rho, nu[obj])
            else:
                alpha = beta = nu.new_zeros(0, self.msg_dim)
            nu = self.aggregate_nodes(t, nu, alpha, beta, subj, obj)
        m = self.mask_size
        return SGNOutput(
            boxes=self.box_head(nu),
            masks=torch.sigmoid(self.mask_head(nu)).view(-1, m, m),
            features=self.feature_head(nu),
        )
