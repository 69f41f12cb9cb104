"""Self-supervised training loop with alternating critic/generator updates.

Per step each sample draws independent node masks, the masked regions are
noise-filled and the generator reconstructs the unmodified input image;
paired supervision (complete source image plus target graph against the
target image) is available as an optional mode. Checkpoints capture every
parameter, optimizer moment, rng state and the latest validation metrics
in one portable container.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import checkpoint as ckpt_io
from .adversarial import (GlobalDiscriminator, LossWeights, ObjectDiscriminator,
                          aux_class_loss, gan_loss, total_synthesis_loss)
from .data import DatasetIndex
from .graph import MaskSpec, SceneGraph
from .model import ManipulationModel, ModelConfig
from .synthesis import crop_boxes


@dataclass
class MaskingConfig:
    p_phi: float = 0.25
    p_x: float = 0.35
    fully_generative: bool = False

    def __post_init__(self):
        if not (0.0 <= self.p_phi <= 1.0 and 0.0 <= self.p_x <= 1.0):
            raise ValueError("masking probabilities must lie in [0, 1]")


@dataclass
class TrainConfig:
    steps: int = 10_000
    batch_size: int = 8
    lr: float = 1e-4
    betas: tuple = (0.9, 0.999)
    seed: int = 0
    mode: str = "self"  # "self" | "supervised"
    val_interval: int = 500
    val_size: int = 64
    disc_base_channels: int = 32

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("step budget must be nonnegative")
        if self.mode not in ("self", "supervised"):
            raise ValueError(f"unknown supervision mode {self.mode!r}")


def sample_masks(g: SceneGraph, cfg: MaskingConfig, rng: np.random.Generator) -> MaskSpec:
    """Independent Bernoulli draws per node for feature and box masking.

    The image region of every hidden node (masked in either component) is
    occluded so the decoder cannot copy its pixels. Occluding on box
    masking too is what lets the model learn to repaint appearance from
    the visual feature alone, which the reconstruction evaluation relies
    on.
    """
    spec = MaskSpec(fully_generative=cfg.fully_generative)
    for i, node in enumerate(g.nodes):
        hidden = False
        if rng.random() < cfg.p_phi:
            spec.nodes_feature_masked.add(i)
            hidden = True
        if rng.random() < cfg.p_x:
            spec.nodes_bbox_masked.add(i)
            hidden = True
        if hidden and node.bbox is not None:
            spec.occlude_regions.append(tuple(node.bbox))
    return spec


@dataclass
class TrainSample:
    image: np.ndarray        # source image fed to the generator
    graph: SceneGraph        # graph fed to the SGN
    target: np.ndarray       # reconstruction target


LOSS_FIELDS = ("recon", "box", "gan_global", "gan_obj", "aux", "total", "d_loss")


class Trainer:
    def __init__(self, model: ManipulationModel, train_cfg: TrainConfig,
                 mask_cfg: MaskingConfig, weights: LossWeights,
                 vocab: Optional[dict] = None):
        self.model = model
        self.cfg = train_cfg
        self.mask_cfg = mask_cfg
        self.weights = weights
        self.vocab = vocab or {}
        torch.manual_seed(train_cfg.seed)
        self.d_global = GlobalDiscriminator(train_cfg.disc_base_channels)
        self.d_obj = ObjectDiscriminator(model.config.n_objects,
                                         train_cfg.disc_base_channels,
                                         crop_size=model.config.crop_size)
        self.opt_g = torch.optim.Adam(model.parameters(), lr=train_cfg.lr,
                                      betas=train_cfg.betas)
        self.opt_d = torch.optim.Adam(
            list(self.d_global.parameters()) + list(self.d_obj.parameters()),
            lr=train_cfg.lr, betas=train_cfg.betas)
        self.rng = np.random.default_rng(train_cfg.seed)
        self.step_count = 0
        self.last_validation: dict = {}

    # ---- one optimization step ----------------------------------------

    def _collect_crops(self, states, generated, targets):
        fake, real, labels = [], [], []
        for i, state in enumerate(states):
            for crop in state.changed:
                fake.append(crop_boxes(generated[i], [crop.fake_rect],
                                       self.model.config.crop_size)[0])
                real.append(crop_boxes(targets[i], [crop.real_rect],
                                       self.model.config.crop_size)[0])
                labels.append(crop.category_id)
        if not fake:
            return None, None, None
        device = generated.device
        return (torch.stack(fake), torch.stack(real),
                torch.tensor(labels, dtype=torch.long, device=device))

    def train_step(self, batch: list[TrainSample]) -> dict:
        model = self.model
        model.train()
        self.d_global.train()
        self.d_obj.train()

        states, targets, gt_boxes, pred_boxes = [], [], [], []
        for item in batch:
            if self.cfg.mode == "self":
                spec = sample_masks(item.graph, self.mask_cfg, self.rng)
            else:
                spec = MaskSpec()
            state = model.prepare(item.image, item.graph, spec, self.rng,
                                  occlude_predicted=False)
            states.append(state)
            targets.append(model.as_image_tensor(item.target))
            for i, node in enumerate(item.graph.nodes):
                if node.bbox is not None and not node.bbox_masked:
                    gt_boxes.append(torch.tensor(node.bbox, dtype=model.dtype))
                    pred_boxes.append(state.sgn.boxes[i])
        generated = model.decode_batch(states)
        target_batch = torch.stack(targets)

        # critic update on detached generations
        fake_crops, real_crops, crop_labels = self._collect_crops(
            states, generated.detach(), targets)
        d_loss = gan_loss(self.d_global(target_batch), self.d_global(generated.detach()),
                          "discriminator")
        if fake_crops is not None:
            adv_real, cls_real = self.d_obj(real_crops)
            adv_fake, cls_fake = self.d_obj(fake_crops)
            d_loss = d_loss + gan_loss(adv_real, adv_fake, "discriminator")
            d_loss = d_loss + self.weights.lambda_a * (
                aux_class_loss(cls_real, crop_labels) + aux_class_loss(cls_fake, crop_labels))
        if not torch.isfinite(d_loss):
            return {"aborted": "non-finite critic loss", "step": self.step_count}
        self.opt_d.zero_grad()
        d_loss.backward()
        self.opt_d.step()

        # generator update through fresh critic scores
        disc_outputs = {"global_fake": self.d_global(generated)}
        if fake_crops is not None:
            fake_live, _, _ = self._collect_crops(states, generated, targets)
            adv_fake_g, cls_fake_g = self.d_obj(fake_live)
            disc_outputs.update(obj_fake=adv_fake_g, obj_class_logits=cls_fake_g,
                                obj_categories=crop_labels)
        gt = torch.stack(gt_boxes) if gt_boxes else None
        pred = torch.stack(pred_boxes) if pred_boxes else None
        total, breakdown = total_synthesis_loss(
            generated, target_batch, gt, pred, disc_outputs, self.weights)
        if not torch.isfinite(total):
            return {"aborted": "non-finite generator loss", "step": self.step_count}
        self.opt_g.zero_grad()
        total.backward()
        self.opt_g.step()

        self.step_count += 1
        breakdown["d_loss"] = float(d_loss.detach())
        breakdown["step"] = self.step_count
        return breakdown

    # ---- validation -----------------------------------------------------

    def validate(self, val_samples) -> dict:
        """Auto-encode protocol: occlude one node's region, features and
        boxes stay active, reconstruct and score against the source."""
        from .metrics import mae, ssim

        model = self.model
        totals = {"mae_all": [], "mae_roi": [], "ssim_all": [], "ssim_roi": []}
        for k, (image, graph) in enumerate(val_samples):
            boxed = [i for i, n in enumerate(graph.nodes) if n.bbox is not None]
            if not boxed:
                continue
            node_idx = boxed[k % len(boxed)]
            region = graph.nodes[node_idx].bbox
            spec = MaskSpec(occlude_regions=[region])
            state = model.generate(image, graph, spec, seed=1000 + k,
                                   occlude_predicted=False)
            gen = state.generated.detach().cpu().numpy()
            totals["mae_all"].append(mae(gen, image))
            totals["mae_roi"].append(mae(gen, image, roi=[region]))
            totals["ssim_all"].append(ssim(gen, image))
            totals["ssim_roi"].append(ssim(gen, image, roi=[region]))
        out = {k: float(np.mean(v)) if v else float("nan") for k, v in totals.items()}
        out["count"] = len(totals["mae_all"])
        return out

    # ---- checkpointing --------------------------------------------------

    def _optimizer_arrays(self, ckpt, prefix, optimizer, named_params):
        names = [n for n, _ in named_params]
        params = [p for _, p in named_params]
        for name, param in zip(names, params):
            state = optimizer.state.get(param)
            if not state:
                continue
            for key in ("step", "exp_avg", "exp_avg_sq"):
                val = state[key]
                arr = val.detach().cpu().numpy() if torch.is_tensor(val) \
                    else np.asarray(val, dtype=np.float32)
                ckpt.arrays[f"{prefix}.{name}.{key}"] = arr.astype("<f4")

    def _restore_optimizer(self, ckpt, prefix, optimizer, named_params):
        state = {}
        for idx, (name, param) in enumerate(named_params):
            entry = {}
            for key in ("step", "exp_avg", "exp_avg_sq"):
                arr = ckpt.arrays.get(f"{prefix}.{name}.{key}")
                if arr is None:
                    break
                t = torch.from_numpy(arr.copy())
                entry[key] = t.reshape(param.shape) if key != "step" else t.reshape(())
            if entry:
                state[idx] = entry
        if state:
            sd = optimizer.state_dict()
            sd["state"] = state
            optimizer.load_state_dict(sd)

    def save_checkpoint(self, path) -> None:
        ckpt = ckpt_io.Checkpoint()
        ckpt.add_state_dict("gen", self.model.state_dict())
        ckpt.add_state_dict("d_global", self.d_global.state_dict())
        ckpt.add_state_dict("d_obj", self.d_obj.state_dict())
        self._optimizer_arrays(ckpt, "opt_g", self.opt_g,
                               list(self.model.named_parameters()))
        disc_params = [(f"g.{n}", p) for n, p in self.d_global.named_parameters()] + \
                      [(f"o.{n}", p) for n, p in self.d_obj.named_parameters()]
        self._optimizer_arrays(ckpt, "opt_d", self.opt_d, disc_params)
        ckpt.meta = {
            "model_config": self.model.config.to_dict(),
            "train_config": asdict(self.cfg),
            "mask_config": asdict(self.mask_cfg),
            "loss_weights": self.weights.to_dict(),
            "vocab": self.vocab,
            "step": self.step_count,
            "rng": ckpt_io.encode_rng(self.rng),
            "torch_rng": ckpt_io.encode_bytes(torch.get_rng_state().numpy().tobytes()),
            "validation": self.last_validation,
        }
        ckpt_io.save(ckpt, path)

    def load_checkpoint_state(self, ckpt: ckpt_io.Checkpoint) -> None:
        load_module_state(self.model, ckpt.state_dict("gen"))
        load_module_state(self.d_global, ckpt.state_dict("d_global"))
        load_module_state(self.d_obj, ckpt.state_dict("d_obj"))
        self._restore_optimizer(ckpt, "opt_g", self.opt_g,
                                list(self.model.named_parameters()))
        disc_params = [(f"g.{n}", p) for n, p in self.d_global.named_parameters()] + \
                      [(f"o.{n}", p) for n, p in self.d_obj.named_parameters()]
        self._restore_optimizer(ckpt, "opt_d", self.opt_d, disc_params)
        self.rng = ckpt_io.decode_rng(ckpt.meta["rng"])
        torch.set_rng_state(torch.from_numpy(np.frombuffer(
            ckpt_io.decode_bytes(ckpt.meta["torch_rng"]), dtype=np.uint8).copy()))
        self.step_count = int(ckpt.meta["step"])
        self.last_validation = ckpt.meta.get("validation", {})

    # ---- full loop -------------------------------------------------------

    def fit(self, dataset: DatasetIndex, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self._check_dataset(dataset)

        train_ids = dataset.ids("train")
        val_ids = sorted(dataset.ids("val"))[: self.cfg.val_size]
        if self.cfg.mode == "self":
            # self-supervision sees only (source image, source graph)
            train_data = [dataset.load_source(i) for i in train_ids]
            batch_of = lambda idx: [TrainSample(img, g, img) for img, g in
                                    (train_data[j] for j in idx)]
        else:
            pairs = [dataset.load_pair(i) for i in train_ids]
            batch_of = lambda idx: [TrainSample(pairs[j].source_image,
                                                pairs[j].target_graph,
                                                pairs[j].target_image) for j in idx]
        val_data = [dataset.load_source(i) for i in val_ids]

        loss_path = out / "loss_log.csv"
        val_path = out / "val_log.csv"
        ckpt_path = out / "checkpoint.bin"
        with open(loss_path, "w", newline="") as loss_file, \
                open(val_path, "w", newline="") as val_file:
            loss_csv = csv.writer(loss_file)
            loss_csv.writerow(("step",) + LOSS_FIELDS)
            val_csv = csv.writer(val_file)
            val_csv.writerow(("step", "mae_all", "mae_roi", "ssim_all", "ssim_roi"))

            if self.cfg.steps == 0:
                self.save_checkpoint(ckpt_path)

            aborted_in_a_row = 0
            while self.step_count < self.cfg.steps:
                idx = self.rng.choice(len(train_ids),
                                      size=min(self.cfg.batch_size, len(train_ids)),
                                      replace=False)
                result = self.train_step(batch_of(idx))
                if "aborted" in result:
                    loss_csv.writerow([self.step_count, result["aborted"]])
                    loss_file.flush()
                    aborted_in_a_row += 1
                    if aborted_in_a_row >= 25:
                        raise RuntimeError(
                            f"training diverged: {aborted_in_a_row} non-finite steps in a row")
                    continue
                aborted_in_a_row = 0
                loss_csv.writerow([result["step"]] +
                                  [f"{result[k]:.6f}" for k in LOSS_FIELDS])
                if result["step"] % 50 == 0:
                    loss_file.flush()
                if result["step"] % self.cfg.val_interval == 0 \
                        or result["step"] == self.cfg.steps:
                    self.last_validation = self.validate(val_data)
                    self.last_validation["step"] = self.step_count
                    val_csv.writerow([self.step_count] +
                                     [f"{self.last_validation[k]:.4f}" for k in
                                      ("mae_all", "mae_roi", "ssim_all", "ssim_roi")])
                    val_file.flush()
                    self.save_checkpoint(ckpt_path)

        if self.cfg.steps > 0:
            self.save_checkpoint(ckpt_path)
        report = {
            "steps": self.step_count,
            "validation": self.last_validation,
            "checkpoint": str(ckpt_path),
        }
        (out / "report.json").write_text(json.dumps(report, indent=2))
        return report

    def _check_dataset(self, dataset: DatasetIndex) -> None:
        cfg = self.model.config
        problems = []
        if dataset.resolution != cfg.image_size:
            problems.append(f"dataset resolution {dataset.resolution} != model "
                            f"image size {cfg.image_size}")
        if len(dataset.objects) != cfg.n_objects:
            problems.append(f"object vocabulary {len(dataset.objects)} != model "
                            f"{cfg.n_objects}")
        if len(dataset.predicates) != cfg.n_predicates:
            problems.append(f"predicate vocabulary {len(dataset.predicates)} != model "
                            f"{cfg.n_predicates}")
        if problems:
            raise ValueError("; ".join(problems))


def load_module_state(module, arrays: dict[str, np.ndarray]) -> None:
    """Load numpy arrays into a torch module, with shape validation."""
    expected = module.state_dict()
    tensors = {}
    for name, ref in expected.items():
        if name not in arrays:
            raise ckpt_io.CheckpointError(f"checkpoint missing array {name!r}")
        arr = arrays[name]
        if tuple(arr.shape) != tuple(ref.shape):
            raise ckpt_io.CheckpointError(
                f"shape mismatch for {name!r}: checkpoint {tuple(arr.shape)} "
                f"vs model {tuple(ref.shape)}")
        tensors[name] = torch.from_numpy(arr.copy()).to(dtype=ref.dtype)
    module.load_state_dict(tensors)


def build_model(meta: dict) -> ManipulationModel:
    return ManipulationModel(ModelConfig.from_dict(meta["model_config"]))


def load_model(path) -> tuple[ManipulationModel, ckpt_io.Checkpoint]:
    """Restore a frozen generator (eval mode) from a checkpoint file."""
    ckpt = ckpt_io.load(path)
    model = build_model(ckpt.meta)
    load_module_state(model, ckpt.state_dict("gen"))
    model.eval()
    return model, ckpt
