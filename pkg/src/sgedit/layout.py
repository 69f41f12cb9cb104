"""Scene layout assembly: box resolution, mask projection, canvas summation.

Per node, the coarse predicted mask is resized into the node's resolved
pixel box and multiplied by the node's feature vector; the per-node
canvases sum into a single feature layout for the decoder. Box placement
uses integer pixel rectangles, so gradients reach box coordinates only
through the explicit box loss, never through the layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .graph import Box, ObjectNode

GROUND_TRUTH = "ground-truth"
PREDICTED = "predicted"
ANCHORED = "center-anchored-size-predicted"


@dataclass
class ResolvedBox:
    top: int
    left: int
    bottom: int
    right: int
    provenance: str
    degenerate: bool = False

    @property
    def height(self) -> int:
        return self.bottom - self.top

    @property
    def width(self) -> int:
        return self.right - self.left


def _clamp_unit(box) -> tuple[float, float, float, float]:
    t, l, b, r = (min(1.0, max(0.0, float(v))) for v in box)
    return t, l, b, r


def to_pixel_rect(box: Box, height: int, width: int) -> tuple[tuple[int, int, int, int], bool]:
    """Normalized (t, l, b, r) to an integer rectangle clamped to the image,
    expanded to at least one pixel per side. Returns (rect, was_degenerate)."""
    t, l, b, r = _clamp_unit(box)
    ti, bi = int(round(t * height)), int(round(b * height))
    li, ri = int(round(l * width)), int(round(r * width))
    degenerate = bi <= ti or ri <= li
    if bi <= ti:
        ti = min(ti, height - 1)
        bi = ti + 1
    if ri <= li:
        li = min(li, width - 1)
        ri = li + 1
    return (ti, li, bi, ri), degenerate


def resolve_box(node: ObjectNode, x_hat, image_size: tuple[int, int],
                sample_masked: bool = False) -> ResolvedBox:
    """Pick the pixel rectangle a node is projected into.

    Ground-truth boxes win when present and unmasked. A node whose box was
    withheld uses the prediction outright, except for the replacement case
    (box retained but flagged) where the old center anchors the predicted
    size.  `sample_masked` marks boxes hidden by a training draw rather
    than an edit; those also fall back to the prediction.
    """
    h, w = image_size
    x_hat = [float(v) for v in x_hat]
    if node.bbox is None:
        rect, deg = to_pixel_rect(_clamp_unit(x_hat), h, w)
        return ResolvedBox(*rect, provenance=PREDICTED, degenerate=deg)
    if node.bbox_masked:
        cy = (node.bbox[0] + node.bbox[2]) / 2.0
        cx = (node.bbox[1] + node.bbox[3]) / 2.0
        t, l, b, r = _clamp_unit(x_hat)
        bh, bw = max(b - t, 0.0), max(r - l, 0.0)
        merged = (cy - bh / 2, cx - bw / 2, cy + bh / 2, cx + bw / 2)
        rect, deg = to_pixel_rect(_clamp_unit(merged), h, w)
        return ResolvedBox(*rect, provenance=ANCHORED, degenerate=deg)
    if sample_masked:
        rect, deg = to_pixel_rect(_clamp_unit(x_hat), h, w)
        return ResolvedBox(*rect, provenance=PREDICTED, degenerate=deg)
    rect, deg = to_pixel_rect(node.bbox, h, w)
    return ResolvedBox(*rect, provenance=GROUND_TRUTH, degenerate=deg)


def project_node(m_hat: torch.Tensor, box: ResolvedBox, feature: torch.Tensor,
                 canvas_size: tuple[int, int]) -> torch.Tensor:
    """Fill the box with the mask-weighted feature vector; zeros elsewhere.

    m_hat: (M, M) mask values, feature: (C,) -> returns (C, H, W).
    """
    h, w = canvas_size
    resized = F.interpolate(m_hat[None, None], size=(box.height, box.width),
                            mode="bilinear", align_corners=True)[0, 0]
    patch = feature[:, None, None] * resized[None]
    return F.pad(patch, (box.left, w - box.right, box.top, h - box.bottom))


def compose(canvases, canvas_shape=None, dtype=torch.float32) -> torch.Tensor:
    """Sum per-node canvases into one layout (empty list gives zeros)."""
    if not len(canvases):
        if canvas_shape is None:
            raise ValueError("canvas_shape required for an empty node list")
        return torch.zeros(canvas_shape, dtype=dtype)
    out = canvases[0]
    for c in canvases[1:]:
        out = out + c
    return out


def export_debug(layout: torch.Tensor, canvases, boxes, out_dir) -> None:
    """Dump per-node projected masks and a layout-magnitude heatmap as PNGs."""
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, canvas in enumerate(canvases):
        mag = canvas.detach().abs().amax(dim=0).cpu().numpy()
        peak = mag.max()
        if peak > 0:
            mag = mag / peak
        Image.fromarray((mag * 255).astype(np.uint8)).save(out_dir / f"node_{i:02d}.png")
    norm = layout.detach().pow(2).sum(dim=0).sqrt().cpu().numpy()
    peak = norm.max()
    if peak > 0:
        norm = norm / peak
    Image.fromarray((norm * 255).astype(np.uint8)).save(out_dir / "layout_norm.png")
