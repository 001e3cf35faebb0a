"""Multiband planar rasters, band statistics and the BRF binary format.

A :class:`Raster` wraps a read-only ``(bands, height, width)`` numpy array.
Samples are stored as float32 or float64; every computation in the package
promotes to float64 first.

BRF layout (little-endian)::

    b"IIBR" | version u16 (=1) | bands u16 | height u32 | width u32 |
    bands*height*width float32 samples, band-major, row-major in band
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    BandOutOfRangeError,
    DimensionMismatchError,
    NonFiniteSampleError,
    ShapeMismatchError,
    TooFewSamplesError,
    TruncatedFileError,
    UnsupportedVersionError,
)

BRF_MAGIC = b"IIBR"
BRF_VERSION = 1
_BRF_HEADER = struct.Struct("<4sHHII")


class Raster:
    """Immutable B x H x W floating-point image."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.asarray(data)
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        if arr.ndim != 3:
            raise DimensionMismatchError(f"expected (bands, height, width), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise DimensionMismatchError(f"empty raster shape {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteSampleError("raster contains NaN or Inf samples")
        arr = np.array(arr, copy=True, order="C")
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def bands(self) -> int:
        return self._data.shape[0]

    @property
    def height(self) -> int:
        return self._data.shape[1]

    @property
    def width(self) -> int:
        return self._data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._data.shape

    @property
    def dtype(self):
        return self._data.dtype

    def band(self, b: int) -> np.ndarray:
        if not 0 <= b < self.bands:
            raise BandOutOfRangeError(f"band {b} outside [0, {self.bands})")
        return self._data[b]

    def as_float64(self) -> np.ndarray:
        return self._data.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.dtype == other.dtype
            and self._data.tobytes() == other._data.tobytes()
        )

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    def __repr__(self):
        return f"Raster(bands={self.bands}, height={self.height}, width={self.width}, dtype={self.dtype})"


@dataclass(frozen=True)
class SampleTriple:
    """One training/testing sample: (lms, pan, target) at a common size."""

    lms: Raster
    pan: Raster
    target: Raster

    def __post_init__(self):
        if self.pan.bands != 1:
            raise ShapeMismatchError(f"pan must have 1 band, got {self.pan.bands}")
        if self.lms.bands != self.target.bands:
            raise ShapeMismatchError(
                f"lms has {self.lms.bands} bands but target has {self.target.bands}"
            )
        sizes = {r.shape[1:] for r in (self.lms, self.pan, self.target)}
        if len(sizes) != 1:
            raise ShapeMismatchError(f"triple members differ in size: {sorted(sizes)}")


def new_raster(bands: int, height: int, width: int, samples) -> Raster:
    """Build a raster from a flat planar sample sequence."""
    if bands < 1 or height < 1 or width < 1:
        raise DimensionMismatchError(f"dimensions must be positive, got {(bands, height, width)}")
    flat = np.asarray(samples, dtype=np.float64).ravel()
    if flat.size != bands * height * width:
        raise DimensionMismatchError(
            f"{flat.size} samples given for {bands}x{height}x{width}={bands * height * width}"
        )
    return Raster(flat.reshape(bands, height, width))


def _mean(x: np.ndarray) -> float:
    # offset from the first sample keeps constant data exact
    return x[0] + np.sum(x - x[0]) / x.size


def band_stats(r: Raster, b: int) -> tuple[float, float]:
    """Mean and unbiased variance of band ``b``; a 1-pixel band has variance 0."""
    x = r.band(b).astype(np.float64).ravel()
    mean = _mean(x)
    if x.size < 2:
        return float(mean), 0.0
    d = x - mean
    return float(mean), float(np.sum(d * d) / (x.size - 1))


def covariance(x, y) -> float:
    """Unbiased sample covariance, two-pass: means first, then centred products."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"covariance of shapes {x.shape} and {y.shape}")
    n = x.size
    if n < 2:
        raise TooFewSamplesError("covariance needs at least 2 samples")
    x = x.ravel()
    y = y.ravel()
    dx = x - _mean(x)
    dy = y - _mean(y)
    return float(np.sum(dx * dy) / (n - 1))


def write_brf(path, r: Raster) -> None:
    with np.errstate(over="ignore"):
        samples = r.data.astype("<f4")
    if not np.all(np.isfinite(samples)):
        raise NonFiniteSampleError("raster overflows float32 storage")
    header = _BRF_HEADER.pack(BRF_MAGIC, BRF_VERSION, r.bands, r.height, r.width)
    with open(os.fspath(path), "wb") as fh:
        fh.write(header)
        fh.write(samples.tobytes(order="C"))


def read_brf(path) -> Raster:
    """Read a BRF file into a float32 raster."""
    with open(os.fspath(path), "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != BRF_MAGIC:
        raise BadMagicError(f"{path}: magic {blob[:4]!r} is not {BRF_MAGIC!r}")
    if len(blob) < _BRF_HEADER.size:
        raise TruncatedFileError(f"{path}: header needs {_BRF_HEADER.size} bytes, file has {len(blob)}")
    _, version, bands, height, width = _BRF_HEADER.unpack_from(blob)
    if version != BRF_VERSION:
        raise UnsupportedVersionError(f"{path}: BRF version {version} (supported: {BRF_VERSION})")
    count = bands * height * width
    if count == 0:
        raise DimensionMismatchError(f"{path}: zero-sized raster {bands}x{height}x{width}")
    need = _BRF_HEADER.size + 4 * count
    if len(blob) < need:
        raise TruncatedFileError(f"{path}: payload needs {need} bytes, file has {len(blob)}")
    if len(blob) > need:
        raise DimensionMismatchError(f"{path}: {len(blob) - need} trailing bytes after payload")
    samples = np.frombuffer(blob, dtype="<f4", count=count, offset=_BRF_HEADER.size)
    return Raster(samples.astype(np.float32).reshape(bands, height, width))
