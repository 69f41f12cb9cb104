"""Reconstruction metrics and evaluation drivers.

MAE is reported on the 0-255 scale and SSIM multiplied by 100. Both come
in a whole-image and an RoI variant; the RoI is the set of rectangles the
evaluated edit occluded or re-painted. The evaluation driver replays the
paper's manipulation protocol on paired samples: apply the stored edit to
the source graph, synthesize, compare against the target image.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import DatasetIndex
from .graph import MaskSpec, apply_edit
from .layout import to_pixel_rect

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _roi_mask(roi, height, width) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for rect in roi:
        (t, l, b, r), _ = to_pixel_rect(tuple(float(v) for v in rect), height, width)
        mask[t:b, l:r] = True
    return mask


def mae(a, b, roi=None) -> float:
    """Mean absolute error on the 0-255 scale, optionally over an RoI union."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if roi is None:
        return float(diff.mean() * 255.0)
    mask = _roi_mask(roi, a.shape[-2], a.shape[-1])
    if not mask.any():
        warnings.warn("empty RoI; MAE defined as 0")
        return 0.0
    return float(diff[..., mask].mean() * 255.0)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b, window=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    """Local SSIM at every center where the full window fits, channel-averaged.

    Gaussian-weighted statistics with the standard stabilizers on unit
    dynamic range. Output shape (H - window + 1, W - window + 1).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a, b = a[None], b[None]
    h, w = a.shape[-2], a.shape[-1]
    if h < window or w < window:
        raise ValueError(f"image {h}x{w} smaller than the {window}x{window} window")
    weights = _gaussian_window(window, sigma)
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    maps = []
    for c in range(a.shape[0]):
        xa = np.lib.stride_tricks.sliding_window_view(a[c], (window, window))
        xb = np.lib.stride_tricks.sliding_window_view(b[c], (window, window))
        mu_a = np.tensordot(xa, weights, axes=((2, 3), (0, 1)))
        mu_b = np.tensordot(xb, weights, axes=((2, 3), (0, 1)))
        var_a = np.tensordot(xa * xa, weights, axes=((2, 3), (0, 1))) - mu_a ** 2
        var_b = np.tensordot(xb * xb, weights, axes=((2, 3), (0, 1))) - mu_b ** 2
        cov = np.tensordot(xa * xb, weights, axes=((2, 3), (0, 1))) - mu_a * mu_b
        maps.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                    / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return np.mean(maps, axis=0)


def ssim(a, b, roi=None) -> float:
    """Mean local SSIM times 100; the RoI variant averages windows whose
    centers fall inside the RoI."""
    smap = ssim_map(a, b)
    if roi is None:
        return float(smap.mean() * 100.0)
    a = np.asarray(a)
    h, w = a.shape[-2], a.shape[-1]
    mask = _roi_mask(roi, h, w)
    half = SSIM_WINDOW // 2
    centers = mask[half:h - half, half:w - half]
    if not centers.any():
        warnings.warn("no valid SSIM window centered in RoI; defined as 0")
        return 0.0
    return float(smap[centers].mean() * 100.0)


# --- evaluation protocol ------------------------------------------------

MODE_TO_KIND = {"remove": "remove", "replace": "attribute",
                "relationship": "swap", "add": "add"}
ALL_MODES = ("auto", "remove", "replace", "relationship", "add")


@dataclass
class EvalReport:
    per_mode: dict = field(default_factory=dict)
    aggregate: dict = field(default_factory=dict)
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {"per_mode": self.per_mode, "aggregate": self.aggregate,
                "config_digest": self.config_digest}


def _mode_metrics(rows) -> dict:
    keys = ("mae_all", "mae_roi", "ssim_all", "ssim_roi")
    out = {k: float(np.mean([r[k] for r in rows])) if rows else float("nan") for k in keys}
    out["count"] = len(rows)
    return out


def _pair_roi(entry_pair, edit, mask_spec) -> list:
    """RoI rectangles for a manipulation sample: every occluded source
    region plus the ground-truth target region of the affected nodes."""
    roi = list(mask_spec.occlude_regions)
    src, tgt = entry_pair.source_graph, entry_pair.target_graph
    kind = entry_pair.kind
    if kind == "add":
        if tgt.nodes[-1].bbox is not None:
            roi.append(tgt.nodes[-1].bbox)
    elif kind == "swap":
        e = src.edges[edit.edge_index]
        for i in (e.subject_index, e.object_index):
            if tgt.nodes[i].bbox is not None:
                roi.append(tgt.nodes[i].bbox)
    elif kind == "attribute":
        if tgt.nodes[edit.node_index].bbox is not None:
            roi.append(tgt.nodes[edit.node_index].bbox)
    return roi


def evaluate(model, dataset: DatasetIndex, modes=ALL_MODES, split="test",
             seed=0, limit=None) -> EvalReport:
    """Score a frozen model per manipulation mode on a dataset split."""
    report = EvalReport()
    all_rows = []
    for mode in modes:
        rows = []
        if mode == "auto":
            ids = dataset.ids(split)[:limit]
            for k, sid in enumerate(ids):
                image, graph = dataset.load_source(sid)
                boxed = [i for i, n in enumerate(graph.nodes) if n.bbox is not None]
                if not boxed:
                    continue
                region = graph.nodes[boxed[k % len(boxed)]].bbox
                spec = MaskSpec(occlude_regions=[region])
                state = model.generate(image, graph, spec, seed=seed + k,
                                       occlude_predicted=False)
                gen = state.generated.cpu().numpy()
                rows.append({"mae_all": mae(gen, image), "mae_roi": mae(gen, image, [region]),
                             "ssim_all": ssim(gen, image),
                             "ssim_roi": ssim(gen, image, [region])})
        else:
            kind = MODE_TO_KIND[mode]
            ids = dataset.ids(split, kind=kind)[:limit]
            if not ids:
                raise ValueError(f"split {split!r} has no paired samples for mode {mode!r}")
            for k, sid in enumerate(ids):
                pair = dataset.load_pair(sid)
                edited, spec = apply_edit(pair.source_graph, pair.edit)
                state = model.generate(pair.source_image, edited, spec, seed=seed + k,
                                       occlude_predicted=True)
                gen = state.generated.cpu().numpy()
                roi = _pair_roi(pair, pair.edit, spec)
                rows.append({"mae_all": mae(gen, pair.target_image),
                             "mae_roi": mae(gen, pair.target_image, roi),
                             "ssim_all": ssim(gen, pair.target_image),
                             "ssim_roi": ssim(gen, pair.target_image, roi)})
        report.per_mode[mode] = _mode_metrics(rows)
        all_rows.extend(rows)
    report.aggregate = _mode_metrics(all_rows)
    digest_src = json.dumps({"model": model.config.to_dict(), "modes": list(modes),
                             "split": split, "seed": seed,
                             "ssim": [SSIM_WINDOW, SSIM_SIGMA, SSIM_K1, SSIM_K2]},
                            sort_keys=True)
    report.config_digest = hashlib.sha256(digest_src.encode()).hexdigest()[:16]
    return report


# --- predicate spatial statistics ----------------------------------------

def _center(box):
    return ((box[1] + box[3]) / 2.0, (box[0] + box[2]) / 2.0)  # (cx, cy)


def predicate_matches_offset(predicate: str, dx: float, dy: float) -> bool:
    """Does a subject-minus-object center offset satisfy the predicate sign?"""
    if predicate == "left of":
        return dx < 0
    if predicate == "right of":
        return dx > 0
    if predicate == "in front of":
        return dy > 0
    if predicate == "behind":
        return dy < 0
    raise ValueError(f"no geometry defined for predicate {predicate!r}")


def predicate_heatmaps(model, dataset: DatasetIndex, out_dir=None, split="test",
                       bins=20, limit=None) -> dict:
    """2D histograms of subject-relative-to-object center offsets per predicate.

    Ground truth uses annotated boxes; the predicted row masks the subject's
    box from the graph and uses the box the SGN then estimates. An even bin
    count keeps zero on a bin edge so sign masses are exact.
    """
    offsets = {name: {"gt": [], "pred": []} for name in dataset.predicates}
    for sid in dataset.ids(split)[:limit]:
        image, graph = dataset.load_source(sid)
        image_t = model.as_image_tensor(image)
        for edge in graph.edges:
            s, o = edge.subject_index, edge.object_index
            if graph.nodes[s].bbox is None or graph.nodes[o].bbox is None:
                continue
            name = dataset.predicates[edge.predicate_id]
            ocx, ocy = _center(graph.nodes[o].bbox)
            scx, scy = _center(graph.nodes[s].bbox)
            offsets[name]["gt"].append((scx - ocx, scy - ocy))
            spec = MaskSpec(nodes_bbox_masked={s})
            with torch.no_grad():
                phi = model.extract_phi(image_t, graph, spec)
                out = model.sgn(graph, spec, phi)
            pcx, pcy = _center([float(v) for v in out.boxes[s]])
            offsets[name]["pred"].append((pcx - ocx, pcy - ocy))

    edges = np.linspace(-1.0, 1.0, bins + 1)
    hists = {}
    for name, d in offsets.items():
        hists[name] = {}
        for key in ("gt", "pred"):
            pts = np.asarray(d[key]) if d[key] else np.zeros((0, 2))
            h, _, _ = np.histogram2d(pts[:, 1] if len(pts) else [],
                                     pts[:, 0] if len(pts) else [],
                                     bins=[edges, edges])
            total = h.sum()
            hists[name][key] = h / total if total > 0 else h
    if out_dir is not None:
        _write_heatmap_pngs(hists, out_dir)
    return hists


def _write_heatmap_pngs(hists: dict, out_dir) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, d in hists.items():
        fig, axes = plt.subplots(1, 2, figsize=(7, 3.2))
        for ax, key, title in zip(axes, ("gt", "pred"), ("ground truth", "predicted")):
            ax.imshow(d[key], origin="lower", extent=(-1, 1, -1, 1), cmap="viridis")
            ax.set_title(f"{name} ({title})", fontsize=9)
            ax.axhline(0, color="w", lw=0.4)
            ax.axvline(0, color="w", lw=0.4)
        fig.tight_layout()
        fig.savefig(out / f"{name.replace(' ', '_')}.png", dpi=110)
        plt.close(fig)


def relationship_geometry_accuracy(model, dataset: DatasetIndex, split="test",
                                   limit=None) -> float:
    """Fraction of relationship-change samples where the predicted subject
    and object centers satisfy the target predicate's sign after the edit
    masks both boxes."""
    ids = dataset.ids(split, kind="swap")[:limit]
    if not ids:
        raise ValueError(f"no relationship-change samples in split {split!r}")
    hits, total = 0, 0
    for sid in ids:
        pair = dataset.load_pair(sid)
        edited, spec = apply_edit(pair.source_graph, pair.edit)
        image_t = model.as_image_tensor(pair.source_image)
        with torch.no_grad():
            phi = model.extract_phi(image_t, edited, spec)
            out = model.sgn(edited, spec, phi)
        edge = edited.edges[_edited_edge_index(pair, edited)]
        s, o = edge.subject_index, edge.object_index
        scx, scy = _center([float(v) for v in out.boxes[s]])
        ocx, ocy = _center([float(v) for v in out.boxes[o]])
        name = dataset.predicates[edge.predicate_id]
        hits += predicate_matches_offset(name, scx - ocx, scy - ocy)
        total += 1
    return hits / total


def _edited_edge_index(pair, edited_graph) -> int:
    # the edited edge keeps its position unless dedupe removed earlier duplicates
    target = (pair.source_graph.edges[pair.edit.edge_index].subject_index,
              pair.edit.new_predicate_id,
              pair.source_graph.edges[pair.edit.edge_index].object_index)
    for k, e in enumerate(edited_graph.edges):
        if e.triple() == target:
            return k
    raise ValueError("edited edge not found after applying the edit")
