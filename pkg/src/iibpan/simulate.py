"""Wald's-protocol data preparation and synthetic multiband scenes.

Scenes are drawn from a SplitMix64 stream in a fixed order so a seed names
one scene on every platform:

1. shared latent field: ``blob_count`` blobs, each drawing
   (center_y, center_x, radius, amplitude) in that order;
2. per band b: gain, offset, then a private field of ``max(blob_count // 4, 1)``
   blobs; band = gain * latent + PRIVATE_WEIGHT * private + offset, min-max
   normalized to [0, 1];
3. pan detail field: ``blob_count`` blobs with radii in [1, 4].

Blob centers are uniform over the pixel grid, radii uniform in [3, H/4]
(detail: [1, 4]), amplitudes uniform in [-1, 1]; a blob adds
``amplitude * exp(-d**2 / (2 * radius**2))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .prng import SplitMix64
from .raster import Raster, SampleTriple

GAIN_RANGE = (0.5, 1.5)
OFFSET_RANGE = (-0.5, 0.5)
PRIVATE_WEIGHT = 0.35
DETAIL_WEIGHT = 0.25


@dataclass(frozen=True)
class SceneSpec:
    bands: int = 4
    height: int = 128
    width: int = 128
    ratio: int = 4
    seed: int = 0
    blob_count: int = 40

    def __post_init__(self):
        if self.ratio < 2:
            raise GeometryError(f"ratio must be >= 2, got {self.ratio}")
        if self.bands < 1:
            raise GeometryError(f"bands must be >= 1, got {self.bands}")
        if self.height < 1 or self.width < 1:
            raise GeometryError(f"scene size must be positive, got {self.height}x{self.width}")
        if self.height % self.ratio or self.width % self.ratio:
            raise GeometryError(
                f"scene {self.height}x{self.width} not divisible by ratio {self.ratio}"
            )
        if self.blob_count < 1:
            raise GeometryError("blob_count must be >= 1")


def degrade(r: Raster, ratio: int) -> Raster:
    """Average-pool each ratio x ratio block (Wald decimation)."""
    if ratio < 1:
        raise GeometryError(f"ratio must be >= 1, got {ratio}")
    if ratio == 1:
        return r
    b, h, w = r.shape
    if h % ratio or w % ratio:
        raise GeometryError(f"{h}x{w} not divisible by ratio {ratio}")
    x = r.as_float64().reshape(b, h // ratio, ratio, w // ratio, ratio)
    # anchored at the block's first sample so constant blocks come back bit-exact
    anchor = x[:, :, :1, :, :1]
    return Raster(anchor[:, :, 0, :, 0] + (x - anchor).mean(axis=(2, 4)))


def _cubic_weights(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Catmull-Rom weights for taps at offsets -1, 0, 1, 2 from floor(src)."""
    d = np.stack([1.0 + t, t, 1.0 - t, 2.0 - t], axis=-1)
    near = ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0
    far = ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a
    return np.where(d <= 1.0, near, np.where(d < 2.0, far, 0.0))


def _resample_axis(x: np.ndarray, axis: int, ratio: int) -> np.ndarray:
    n = x.shape[axis]
    u = np.arange(n * ratio, dtype=np.float64)
    src = (u + 0.5) / ratio - 0.5
    base = np.floor(src)
    w = _cubic_weights(src - base)
    idx = np.clip(base.astype(np.int64)[:, None] + np.arange(-1, 3), 0, n - 1)
    x = np.moveaxis(x, axis, -1)
    centre = x[..., idx[:, 1]]
    out = centre.copy()
    for k in (0, 2, 3):
        out += w[:, k] * (x[..., idx[:, k]] - centre)
    return np.moveaxis(out, -1, axis)


def upsample(r: Raster, ratio: int) -> Raster:
    """Separable bicubic (a = -0.5) enlargement with sample-center alignment and edge clamping.

    The centre tap's weight is folded into the offsets of the others, which
    keeps constant regions exact.
    """
    if ratio < 1:
        raise GeometryError(f"ratio must be >= 1, got {ratio}")
    if ratio == 1:
        return r
    x = r.as_float64()
    x = _resample_axis(x, 1, ratio)
    x = _resample_axis(x, 2, ratio)
    return Raster(x)


def _blob_field(rng: SplitMix64, height: int, width: int, count: int, rmin: float, rmax: float) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    field = np.zeros((height, width))
    for _ in range(count):
        cy = rng.random() * height
        cx = rng.random() * width
        radius = rng.uniform_range(rmin, rmax)
        amp = rng.uniform_range(-1.0, 1.0)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius * radius))
    return field


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(), x.max()
    if hi - lo <= 0.0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def synth_bands(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Full-resolution band stack (B, H, W) and pan (H, W), both in [0, 1]."""
    rng = SplitMix64(spec.seed)
    h, w = spec.height, spec.width
    latent = _blob_field(rng, h, w, spec.blob_count, 3.0, max(h / 4.0, 3.0))
    bands = np.empty((spec.bands, h, w))
    for b in range(spec.bands):
        gain = rng.uniform_range(*GAIN_RANGE)
        offset = rng.uniform_range(*OFFSET_RANGE)
        private = _blob_field(rng, h, w, max(spec.blob_count // 4, 1), 3.0, max(h / 4.0, 3.0))
        bands[b] = _minmax(gain * latent + PRIVATE_WEIGHT * private + offset)
    detail = _blob_field(rng, h, w, spec.blob_count, 1.0, 4.0)
    pan = _minmax(_minmax(bands.mean(axis=0)) + DETAIL_WEIGHT * detail)
    return bands, pan


def synth_scene(spec: SceneSpec) -> tuple[Raster, Raster]:
    """Return ``(ms, pan)``: ms at H/ratio x W/ratio, pan at H x W."""
    bands, pan = synth_bands(spec)
    return degrade(Raster(bands), spec.ratio), Raster(pan)


def make_triple(ms: Raster, pan: Raster, ratio: int) -> SampleTriple:
    """Reduce (ms, pan) by ``ratio`` so the original ms becomes the reference."""
    if pan.bands != 1:
        raise GeometryError(f"pan must have 1 band, got {pan.bands}")
    if pan.height != ms.height * ratio or pan.width != ms.width * ratio:
        raise GeometryError(
            f"pan {pan.height}x{pan.width} is not ms {ms.height}x{ms.width} times {ratio}"
        )
    if ms.height % ratio or ms.width % ratio:
        raise GeometryError(f"ms {ms.height}x{ms.width} not divisible by ratio {ratio}")
    lms = upsample(degrade(ms, ratio), ratio)
    return SampleTriple(lms=lms, pan=degrade(pan, ratio), target=ms)


def make_dataset(count: int, bands: int = 4, size: int = 128, ratio: int = 4, seed: int = 0,
                 blob_count: int = 40) -> tuple[list[SampleTriple], list[Raster]]:
    """``count`` triples from consecutive scene seeds, plus each scene's full-scale pan."""
    triples, pans = [], []
    for i in range(count):
        spec = SceneSpec(bands=bands, height=size, width=size, ratio=ratio, seed=seed + i,
                         blob_count=blob_count)
        ms, pan = synth_scene(spec)
        triples.append(make_triple(ms, pan, ratio))
        pans.append(pan)
    return triples, pans
