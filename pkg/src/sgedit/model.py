"""Generator assembly: graph network, layout, image branch and decoder.

One module owns every trainable piece of the generator so that training,
evaluation and the service all run the identical pipeline:

    phi extraction -> SGN -> box resolution -> layout -> occlusion ->
    image encoding -> refinement decoding
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import torch
import torch.nn as nn

from .graph import MaskSpec, SceneGraph
from .layout import (GROUND_TRUTH, ResolvedBox, compose, project_node,
                     resolve_box, to_pixel_rect)
from .sgn import SceneGraphNet, SGNOutput
from .synthesis import (CRNConfig, CropEncoder, ImageEncoder, OccludedImage,
                        RefinementDecoder, crop_boxes, occlude)

DESK_CRN = (128, 128, 64, 64, 32)
PAPER_CRN = (1024, 512, 256, 128, 64)


@dataclass
class ModelConfig:
    n_objects: int
    n_predicates: int
    image_size: int = 64
    embed_dim: int = 128
    feature_dim: int = 128      # visual feature width (phi)
    node_out_dim: int = 128     # SGN output feature width (psi)
    mask_size: int = 16
    sgn_hidden: int = 512
    sgn_msg_dim: int = 128
    sgn_layers: int = 5
    head_hidden: int = 128
    encoder_channels: int = 32
    crop_size: int = 32
    crop_base_channels: int = 32
    crn_channels: tuple = DESK_CRN
    use_visual_features: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crn_channels"] = list(self.crn_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["crn_channels"] = tuple(d["crn_channels"])
        return cls(**d)


def preset_config(preset: str, n_objects: int, n_predicates: int,
                  image_size: int = 64, **overrides) -> ModelConfig:
    channels = {"desk": DESK_CRN, "paper": PAPER_CRN}[preset]
    return ModelConfig(n_objects=n_objects, n_predicates=n_predicates,
                       image_size=image_size, crn_channels=channels, **overrides)


@dataclass
class ChangedCrop:
    """One node whose image region was altered, for the object critic."""
    category_id: int
    fake_rect: tuple  # pixel rect where the object is painted in the generated image
    real_rect: tuple  # pixel rect of the real object in the target image


@dataclass
class PipelineState:
    """Every intermediate of one sample's pass, kept for losses and debugging."""
    phi: torch.Tensor
    sgn: SGNOutput
    boxes: list
    layout: torch.Tensor
    occluded: OccludedImage
    image_features: Optional[torch.Tensor] = None
    generated: Optional[torch.Tensor] = None
    changed: list = field(default_factory=list)  # ChangedCrop per altered node


class ManipulationModel(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.sgn = SceneGraphNet(
            config.n_objects, config.n_predicates, embed_dim=config.embed_dim,
            feature_dim=config.feature_dim, node_out_dim=config.node_out_dim,
            mask_size=config.mask_size, hidden_dim=config.sgn_hidden,
            msg_dim=config.sgn_msg_dim, head_hidden=config.head_hidden,
            num_layers=config.sgn_layers)
        self.crop_encoder = CropEncoder(
            feature_dim=config.feature_dim, base_channels=config.crop_base_channels,
            crop_size=config.crop_size)
        self.image_encoder = ImageEncoder(out_channels=config.encoder_channels)
        crn = CRNConfig(channels=tuple(config.crn_channels), resolution=config.image_size)
        self.decoder = RefinementDecoder(
            config.feature_dim + config.node_out_dim + config.encoder_channels, crn)

    @property
    def dtype(self):
        return self.sgn.dtype

    @property
    def device(self):
        return self.sgn.isolated_proj.weight.device

    def as_image_tensor(self, image) -> torch.Tensor:
        t = torch.as_tensor(np.asarray(image)) if not torch.is_tensor(image) else image
        return t.to(dtype=self.dtype, device=self.device)

    def extract_phi(self, image: torch.Tensor, g: SceneGraph,
                    mask_spec: Optional[MaskSpec] = None) -> torch.Tensor:
        """Visual features per node: zeros when masked or without a box,
        the stored vector when present, else the encoded clean-image crop."""
        n = len(g.nodes)
        phi = torch.zeros(n, self.config.feature_dim, dtype=self.dtype, device=self.device)
        if not self.config.use_visual_features:
            return phi
        crop_idx, boxes = [], []
        for i, node in enumerate(g.nodes):
            masked = node.feature_masked or (
                mask_spec is not None and i in mask_spec.nodes_feature_masked)
            if masked:
                continue
            if node.visual_feature is not None:
                phi[i] = torch.as_tensor(np.asarray(node.visual_feature),
                                         dtype=self.dtype, device=self.device)
            elif node.bbox is not None:
                crop_idx.append(i)
                boxes.append(node.bbox)
        if crop_idx:
            crops = crop_boxes(image, boxes, self.config.crop_size)
            encoded = self.crop_encoder(crops)
            phi = phi.index_put((torch.tensor(crop_idx, device=self.device),), encoded)
        return phi

    def resolve_boxes(self, g: SceneGraph, x_hat: torch.Tensor,
                      mask_spec: Optional[MaskSpec] = None) -> list[ResolvedBox]:
        size = (self.config.image_size, self.config.image_size)
        out = []
        for i, node in enumerate(g.nodes):
            sample_masked = mask_spec is not None and i in mask_spec.nodes_bbox_masked
            out.append(resolve_box(node, x_hat[i].detach(), size, sample_masked=sample_masked))
        return out

    def build_layout(self, phi: torch.Tensor, sgn_out: SGNOutput,
                     boxes: list[ResolvedBox]) -> torch.Tensor:
        size = (self.config.image_size, self.config.image_size)
        channels = self.config.feature_dim + self.config.node_out_dim
        features = torch.cat([phi, sgn_out.features], dim=1)
        canvases = [project_node(sgn_out.masks[i], boxes[i], features[i], size)
                    for i in range(len(boxes))]
        return compose(canvases, canvas_shape=(channels, *size), dtype=self.dtype)

    def prepare(self, image, g: SceneGraph, mask_spec: Optional[MaskSpec],
                rng: np.random.Generator, occlude_predicted: bool = False) -> PipelineState:
        """Graph-side pass for one sample, up to (layout, occluded image).

        With `occlude_predicted`, regions of nodes whose boxes were not
        ground truth are noise-filled too, so re-placed or new objects are
        synthesized rather than copied.
        """
        image = self.as_image_tensor(image)
        spec = mask_spec if mask_spec is not None else MaskSpec()
        phi = self.extract_phi(image, g, spec)
        sgn_out = self.sgn(g, spec, phi)
        boxes = self.resolve_boxes(g, sgn_out.boxes, spec)
        layout = self.build_layout(phi, sgn_out, boxes)

        h = w = self.config.image_size
        eff = MaskSpec(occlude_regions=list(spec.occlude_regions),
                       fully_generative=spec.fully_generative)
        changed = []
        for i, (node, box) in enumerate(zip(g.nodes, boxes)):
            predicted_placement = box.provenance != GROUND_TRUTH
            if occlude_predicted and predicted_placement:
                eff.occlude_regions.append((box.top / h, box.left / w,
                                            box.bottom / h, box.right / w))
            # a node counts as changed exactly when its region is in-painted:
            # hidden in either component by the mask spec / edit flags, or
            # re-placed at a predicted box during edit inference
            hidden = (node.feature_masked or i in spec.nodes_feature_masked
                      or node.bbox_masked or i in spec.nodes_bbox_masked)
            if hidden or (occlude_predicted and predicted_placement):
                fake_rect = (box.top, box.left, box.bottom, box.right)
                if node.bbox is not None:
                    real_rect, _ = to_pixel_rect(node.bbox, h, w)
                else:
                    real_rect = fake_rect
                changed.append(ChangedCrop(node.category_id, fake_rect, real_rect))
        occluded = occlude(image, eff, rng)
        return PipelineState(phi=phi, sgn=sgn_out, boxes=boxes, layout=layout,
                             occluded=occluded, changed=changed)

    def decode_batch(self, states: list[PipelineState]) -> torch.Tensor:
        layouts = torch.stack([s.layout for s in states])
        stacked = torch.stack([s.occluded.stacked() for s in states])
        feats = self.image_encoder(stacked)
        generated = self.decoder(layouts, feats)
        for s, f, img in zip(states, feats, generated):
            s.image_features = f
            s.generated = img
        return generated

    @torch.no_grad()
    def generate(self, image, g: SceneGraph, mask_spec: Optional[MaskSpec] = None,
                 seed: int = 0, occlude_predicted: bool = True) -> PipelineState:
        """Deterministic single-image inference with frozen statistics."""
        was_training = self.training
        self.eval()
        try:
            rng = np.random.default_rng(seed)
            state = self.prepare(image, g, mask_spec, rng,
                                 occlude_predicted=occlude_predicted)
            self.decode_batch([state])
        finally:
            self.train(was_training)
        return state
