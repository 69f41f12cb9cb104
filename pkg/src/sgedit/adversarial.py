"""Discriminators and the training objective.

A global discriminator scores whole images at patch level; an object
discriminator scores 32x32 crops of the regions an edit or mask changed
and carries an auxiliary category-classification head. All losses are
computed from logits in numerically stable form.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from .sgn import LEAKY_SLOPE


@dataclass
class LossWeights:
    lambda_g: float = 0.01
    lambda_o: float = 0.01
    lambda_a: float = 0.1
    lambda_b: float = 10.0

    def to_dict(self) -> dict:
        return asdict(self)


class GlobalDiscriminator(nn.Module):
    """Four strided convolutions to a patch logit map."""

    def __init__(self, base_channels=64):
        super().__init__()
        b = base_channels
        self.net = nn.Sequential(
            nn.Conv2d(3, b, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b, b * 2, 4, stride=2, padding=1),
            nn.GroupNorm(4, b * 2),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b * 2, b * 4, 4, stride=2, padding=1),
            nn.GroupNorm(4, b * 4),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b * 4, b * 8, 4, stride=2, padding=1),
            nn.GroupNorm(4, b * 8),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b * 8, 1, 3, padding=1),
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.net(images)


class ObjectDiscriminator(nn.Module):
    """Crop discriminator with a real/fake head and a category head."""

    def __init__(self, n_classes: int, base_channels=64, crop_size=32):
        super().__init__()
        b = base_channels
        self.crop_size = crop_size
        # group norm: the critic may see a single changed crop per step
        self.conv = nn.Sequential(
            nn.Conv2d(3, b, 4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b, b * 2, 4, stride=2, padding=1),
            nn.GroupNorm(4, b * 2),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(b * 2, b * 4, 4, stride=2, padding=1),
            nn.GroupNorm(4, b * 4),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        feat = b * 4 * (crop_size // 8) ** 2
        self.adv_head = nn.Linear(feat, 1)
        self.class_head = nn.Linear(feat, n_classes)

    def forward(self, crops: torch.Tensor):
        x = self.conv(crops).flatten(1)
        return self.adv_head(x).squeeze(1), self.class_head(x)


def gan_loss(logits_real, logits_fake, side: str) -> torch.Tensor:
    """Cross-entropy GAN objective on logits.

    The discriminator side returns the negated value of
    E[log D(real)] + E[log(1 - D(fake))], the generator side the
    non-saturating -E[log D(fake)].
    """
    if side == "discriminator":
        return F.softplus(-logits_real).mean() + F.softplus(logits_fake).mean()
    if side == "generator":
        return F.softplus(-logits_fake).mean()
    raise ValueError(f"unknown side {side!r}")


def aux_class_loss(class_logits: torch.Tensor, categories: torch.Tensor) -> torch.Tensor:
    return F.cross_entropy(class_logits, categories)


def total_synthesis_loss(generated, target, gt_boxes, pred_boxes, disc_outputs,
                         weights: LossWeights):
    """Generator objective: photometric term plus weighted GAN, auxiliary
    classification and box regression terms. Returns (total, breakdown)."""
    zero = generated.new_zeros(())
    recon = (generated - target).abs().mean()
    box = (gt_boxes - pred_boxes).abs().mean() if gt_boxes is not None and len(gt_boxes) else zero
    g_logits = disc_outputs.get("global_fake")
    gan_g = gan_loss(None, g_logits, "generator") if g_logits is not None else zero
    o_logits = disc_outputs.get("obj_fake")
    gan_o = gan_loss(None, o_logits, "generator") if o_logits is not None and o_logits.numel() else zero
    cls = disc_outputs.get("obj_class_logits")
    if cls is not None and cls.numel():
        aux = aux_class_loss(cls, disc_outputs["obj_categories"])
    else:
        aux = zero
    total = (recon + weights.lambda_g * gan_g + weights.lambda_o * gan_o
             + weights.lambda_a * aux + weights.lambda_b * box)
    breakdown = {"recon": float(recon.detach()), "box": float(box.detach()),
                 "gan_global": float(gan_g.detach()), "gan_obj": float(gan_o.detach()),
                 "aux": float(aux.detach()), "total": float(total.detach())}
    return total, breakdown
