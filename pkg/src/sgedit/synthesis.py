"""Image-side components: occlusion, low-level encoding, crop features, decoder.

The source image enters the generator twice: whole-image features from a
1x1 convolutional branch over the occluded image plus its occlusion
indicator, and per-object appearance vectors from crops of the clean
image. A cascaded refinement stack decodes the layout and image features
coarse-to-fine into the output image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .graph import MaskSpec
from .layout import to_pixel_rect
from .sgn import LEAKY_SLOPE

NOISE_MEAN = 0.5
NOISE_STD = 0.25


@dataclass
class OccludedImage:
    image: torch.Tensor      # (3, H, W) in [0, 1], noise inside occluded regions
    indicator: torch.Tensor  # (1, H, W), 1 inside occluded regions

    def stacked(self) -> torch.Tensor:
        return torch.cat([self.image, self.indicator], dim=0)


def occlude(image: torch.Tensor, mask_spec: MaskSpec, rng: np.random.Generator) -> OccludedImage:
    """Replace the masked regions with clamped Gaussian noise.

    Pixels outside the regions are preserved bit-exactly; regions reaching
    past the border are clipped to it. One full noise field is drawn per
    call so the noise depends only on the rng state, not the region list.
    """
    _, h, w = image.shape
    indicator = torch.zeros(1, h, w, dtype=image.dtype, device=image.device)
    if mask_spec.fully_generative:
        indicator[:] = 1.0
    else:
        for region in mask_spec.occlude_regions:
            t, l, b, r = (min(1.0, max(0.0, float(v))) for v in region)
            ti, bi = int(round(t * h)), int(round(b * h))
            li, ri = int(round(l * w)), int(round(r * w))
            indicator[:, ti:bi, li:ri] = 1.0
    noise = rng.normal(NOISE_MEAN, NOISE_STD, size=(image.shape[0], h, w))
    noise = torch.as_tensor(np.clip(noise, 0.0, 1.0), dtype=image.dtype, device=image.device)
    return OccludedImage(image=torch.where(indicator > 0, noise, image), indicator=indicator)


class ImageEncoder(nn.Module):
    """Full-image branch: 1x1 convolution over (image + indicator)."""

    def __init__(self, out_channels=32):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(4, out_channels, kernel_size=1),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class CropEncoder(nn.Module):
    """Strided convolutional encoder turning an object crop into its visual feature."""

    def __init__(self, feature_dim=128, base_channels=32, crop_size=32):
        super().__init__()
        self.crop_size = crop_size
        chans = [3, base_channels, base_channels * 2, base_channels * 4, base_channels * 4]
        layers = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            # group norm: crop batches can be tiny (often a single changed object)
            layers += [nn.Conv2d(cin, cout, 3, stride=2, padding=1),
                       nn.GroupNorm(4, cout),
                       nn.LeakyReLU(LEAKY_SLOPE)]
        self.conv = nn.Sequential(*layers)
        self.fc = nn.Linear(chans[-1], feature_dim)

    def forward(self, crops: torch.Tensor) -> torch.Tensor:
        x = self.conv(crops)
        return self.fc(x.mean(dim=(2, 3)))


def crop_boxes(image: torch.Tensor, boxes, crop_size: int) -> torch.Tensor:
    """Cut normalized or pixel boxes out of (3, H, W) and resize to crop_size.

    Degenerate boxes are expanded to one pixel before cropping.
    """
    _, h, w = image.shape
    crops = []
    for box in boxes:
        if all(isinstance(v, (int, np.integer)) for v in box):
            rect = box
        else:
            rect, _ = to_pixel_rect(tuple(float(v) for v in box), h, w)
        t, l, b, r = rect
        patch = image[:, t:b, l:r]
        crops.append(F.interpolate(patch[None], size=(crop_size, crop_size),
                                   mode="bilinear", align_corners=False)[0])
    return torch.stack(crops)


def extract_node_feature(image: torch.Tensor, bbox, encoder: CropEncoder) -> torch.Tensor:
    crops = crop_boxes(image, [bbox], encoder.crop_size)
    return encoder(crops)[0]


@dataclass
class CRNConfig:
    channels: tuple = (1024, 512, 256, 128, 64)
    resolution: int = 64

    def __post_init__(self):
        if not self.channels or any(c <= 0 for c in self.channels):
            raise ValueError("channel widths must be positive and nonempty")
        coarsest = self.resolution // (2 ** len(self.channels))
        if coarsest < 1 or coarsest * 2 ** len(self.channels) != self.resolution:
            raise ValueError(
                f"resolution {self.resolution} not divisible into {len(self.channels)} "
                "doubling stages")

    @property
    def coarsest(self) -> int:
        return self.resolution // (2 ** len(self.channels))


class RefinementModule(nn.Module):
    def __init__(self, in_channels, out_channels):
        super().__init__()
        # replicate padding keeps constant inputs constant and avoids border halos
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, out_channels, 3, padding=1, padding_mode="replicate"),
            nn.BatchNorm2d(out_channels),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(out_channels, out_channels, 3, padding=1, padding_mode="replicate"),
            nn.BatchNorm2d(out_channels),
            nn.LeakyReLU(LEAKY_SLOPE),
        )

    def forward(self, x):
        return self.net(x)


class RefinementDecoder(nn.Module):
    """Cascade of refinement modules, doubling resolution per module.

    The input (layout concatenated with image features) starts downsampled
    to the coarsest scale; a matching downsample of it is concatenated
    before every module.
    """

    def __init__(self, in_channels: int, config: CRNConfig):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        mods = []
        prev = in_channels
        for cout in config.channels:
            mods.append(RefinementModule(prev + in_channels, cout))
            prev = cout
        self.modules_list = nn.ModuleList(mods)
        self.to_rgb = nn.Conv2d(config.channels[-1], 3, kernel_size=1)

    def forward(self, layout: torch.Tensor, image_features: torch.Tensor) -> torch.Tensor:
        x0 = torch.cat([layout, image_features], dim=1)
        size = self.config.coarsest
        x = F.interpolate(x0, size=(size, size), mode="area")
        for module in self.modules_list:
            size *= 2
            x = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)
            skip = F.interpolate(x0, size=(size, size), mode="area") if size != x0.shape[-1] else x0
            x = module(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.to_rgb(x))
