import numpy as np
import pytest
import torch

from sgedit.graph import ObjectNode, RelationEdge, SceneGraph
from sgedit.model import ManipulationModel, ModelConfig

VOCAB_OBJECTS = 10
VOCAB_PREDICATES = 5


def tiny_config(**overrides) -> ModelConfig:
    """Small-width config; architecture identical, cheap enough for
    exhaustive finite-difference checks."""
    base = dict(
        n_objects=VOCAB_OBJECTS, n_predicates=VOCAB_PREDICATES, image_size=16,
        embed_dim=6, feature_dim=5, node_out_dim=4, mask_size=4, sgn_hidden=8,
        sgn_msg_dim=7, sgn_layers=2, head_hidden=6, encoder_channels=4,
        crop_size=8, crop_base_channels=4, crn_channels=(8, 8),
    )
    base.update(overrides)
    return ModelConfig(**base)


def make_model(seed=0, dtype=torch.float64, **overrides) -> ManipulationModel:
    torch.manual_seed(seed)
    model = ManipulationModel(tiny_config(**overrides))
    return model.to(dtype)


def random_graph(rng: np.random.Generator, max_nodes=8, min_nodes=1,
                 feature_dim=5, with_flags=False) -> SceneGraph:
    n = int(rng.integers(min_nodes, max_nodes + 1))
    nodes = []
    for _ in range(n):
        t, b = np.sort(rng.uniform(0.0, 1.0, 2))
        l, r = np.sort(rng.uniform(0.0, 1.0, 2))
        b = max(b, t + 1e-3)
        r = max(r, l + 1e-3)
        node = ObjectNode(
            category_id=int(rng.integers(VOCAB_OBJECTS)),
            bbox=(float(t), float(l), float(min(b, 1.0)), float(min(r, 1.0))),
            visual_feature=rng.standard_normal(feature_dim).astype(np.float32)
            if rng.random() < 0.7 else None,
        )
        if with_flags:
            node.feature_masked = bool(rng.random() < 0.2)
            node.bbox_masked = bool(rng.random() < 0.2)
        nodes.append(node)
    edges = []
    if n >= 2:
        for _ in range(int(rng.integers(0, 2 * n + 1))):
            i, j = rng.choice(n, size=2, replace=False)
            edges.append(RelationEdge(int(i), int(rng.integers(VOCAB_PREDICATES)), int(j)))
    return SceneGraph(nodes=nodes, edges=edges)


def finite_diff_grad(f, tensor: torch.Tensor, indices, eps=1e-6):
    """Central finite differences of scalar-valued f at selected flat indices."""
    grads = {}
    flat = tensor.data.view(-1)
    for idx in indices:
        orig = flat[idx].item()
        flat[idx] = orig + eps
        plus = float(f())
        flat[idx] = orig - eps
        minus = float(f())
        flat[idx] = orig
        grads[idx] = (plus - minus) / (2 * eps)
    return grads


def relative_error(analytic: float, numeric: float, floor=1e-4) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(f, named_tensors, rng, max_coords_per_tensor=None, eps=1e-6,
                    tol=1e-4):
    """Compare autograd gradients of f() against central differences.

    Returns the worst relative error seen; asserts every checked coordinate
    is within tol.
    """
    loss = f()
    params = [t for _, t in named_tensors]
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    worst = 0.0
    for (name, tensor), grad in zip(named_tensors, grads):
        numel = tensor.numel()
        if max_coords_per_tensor is None or numel <= max_coords_per_tensor:
            indices = range(numel)
        else:
            indices = sorted(rng.choice(numel, size=max_coords_per_tensor, replace=False))
        analytic_flat = (grad if grad is not None else torch.zeros_like(tensor)).reshape(-1)
        with torch.no_grad():
            fd = finite_diff_grad(f, tensor, indices, eps=eps)
        for idx, numeric in fd.items():
            err = relative_error(float(analytic_flat[idx]), numeric)
            worst = max(worst, err)
            assert err < tol, (
                f"gradient mismatch at {name}[{idx}]: "
                f"analytic={float(analytic_flat[idx]):.3e} fd={numeric:.3e} rel={err:.3e}")
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
