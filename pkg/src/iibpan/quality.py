"""Fusion quality indices: Q/UIQI, SAM, ERGAS and the no-reference QNR family.

Window statistics use the unbiased (N - 1) divisor. Metric evaluation
(``epsilon == 0``) drops windows whose Q denominator is exactly zero; the
loss path keeps every window and relies on ``epsilon > 0`` instead.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateWindowError, GeometryError, ShapeMismatchError, TooFewSamplesError
from .raster import Raster


@dataclass(frozen=True)
class QConfig:
    window: int = 8
    stride: int = 1
    epsilon: float = 0.0

    def __post_init__(self):
        if self.window < 2:
            raise GeometryError(f"window must be >= 2, got {self.window}")
        if self.stride < 1:
            raise GeometryError(f"stride must be >= 1, got {self.stride}")
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise GeometryError(f"epsilon must be finite and >= 0, got {self.epsilon}")

    def fitted(self, height: int, width: int) -> "QConfig":
        """Same config with the window shrunk to fit a small image."""
        window = min(self.window, height, width)
        if window == self.window:
            return self
        return QConfig(window=window, stride=self.stride, epsilon=self.epsilon)


UIQI_CONFIG = QConfig(window=8, stride=1, epsilon=0.0)
QNR_CONFIG = QConfig(window=32, stride=32, epsilon=0.0)


@dataclass(frozen=True)
class WindowStats:
    """Per-window sufficient statistics of Q, each shaped like the window grid."""

    mean_x: np.ndarray
    mean_y: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    cov_xy: np.ndarray


def windows(x: np.ndarray, cfg: QConfig) -> np.ndarray:
    """View of all W x W windows at the configured stride, shape (nh, nw, W, W)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D band, got shape {x.shape}")
    if cfg.window > min(x.shape):
        raise GeometryError(f"window {cfg.window} does not fit a {x.shape[0]}x{x.shape[1]} band")
    view = sliding_window_view(x, (cfg.window, cfg.window))
    return view[:: cfg.stride, :: cfg.stride]


def window_stats(wx: np.ndarray, wy: np.ndarray) -> WindowStats:
    n = wx.shape[-1] * wx.shape[-2]
    # means offset from each window's first sample: constant windows stay exact
    ax, ay = wx[..., :1, :1], wy[..., :1, :1]
    mx = ax[..., 0, 0] + (wx - ax).sum(axis=(-2, -1)) / n
    my = ay[..., 0, 0] + (wy - ay).sum(axis=(-2, -1)) / n
    dx = wx - mx[..., None, None]
    dy = wy - my[..., None, None]
    return WindowStats(
        mean_x=mx,
        mean_y=my,
        var_x=(dx * dx).sum(axis=(-2, -1)) / (n - 1),
        var_y=(dy * dy).sum(axis=(-2, -1)) / (n - 1),
        cov_xy=(dx * dy).sum(axis=(-2, -1)) / (n - 1),
    )


def q_terms(s: WindowStats, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and (stabilized) denominator of Q, written symmetrically in x and y."""
    num = 4.0 * s.cov_xy * (s.mean_x * s.mean_y)
    den = (s.var_x + s.var_y) * (s.mean_x * s.mean_x + s.mean_y * s.mean_y) + epsilon
    return num, den


def q_local(x, y, epsilon: float = 0.0) -> float:
    """Q of a single window pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"window shapes differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise TooFewSamplesError("Q needs at least 2 samples per window")
    s = window_stats(x.reshape(1, 1, -1), y.reshape(1, 1, -1))
    num, den = q_terms(s, epsilon)
    if den[0] == 0.0:
        raise DegenerateWindowError("both Q denominator factors are zero")
    return float(num[0] / den[0])


def q_map(x, y, cfg: QConfig) -> np.ndarray:
    """Local Q for every window; NaN marks degenerate windows (epsilon == 0 only)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"band shapes differ: {x.shape} vs {y.shape}")
    num, den = q_terms(window_stats(windows(x, cfg), windows(y, cfg)), cfg.epsilon)
    out = np.full(num.shape, np.nan)
    ok = den != 0.0
    out[ok] = num[ok] / den[ok]
    return out


def q_index(x, y, cfg: QConfig = UIQI_CONFIG) -> float:
    """Mean local Q over the sliding windows, degenerate windows excluded."""
    q = q_map(x, y, cfg).ravel()
    q = q[~np.isnan(q)]
    if q.size == 0:
        raise DegenerateWindowError("every window is degenerate")
    return float(np.sum(q) / q.size)


def _check_same(f: Raster, m: Raster) -> None:
    if f.shape != m.shape:
        raise ShapeMismatchError(f"shapes differ: {f.shape} vs {m.shape}")


def uiqi(f: Raster, m: Raster, cfg: QConfig = UIQI_CONFIG) -> float:
    _check_same(f, m)
    cfg = cfg.fitted(f.height, f.width)
    fd, md = f.as_float64(), m.as_float64()
    return float(sum(q_index(fd[b], md[b], cfg) for b in range(f.bands)) / f.bands)


def sam(f: Raster, m: Raster) -> float:
    """Mean spectral angle in degrees over pixels where neither spectrum is all-zero."""
    _check_same(f, m)
    fd = f.as_float64().reshape(f.bands, -1)
    md = m.as_float64().reshape(m.bands, -1)
    dot = np.sum(fd * md, axis=0)
    nf = np.sum(fd * fd, axis=0)
    nm = np.sum(md * md, axis=0)
    ok = (nf > 0.0) & (nm > 0.0)
    if not np.any(ok):
        raise DegenerateWindowError("every pixel has an all-zero spectrum")
    cos = np.clip(dot[ok] / np.sqrt(nf[ok] * nm[ok]), -1.0, 1.0)
    return float(np.degrees(np.mean(np.arccos(cos))))


def ergas(f: Raster, m: Raster, ratio: float) -> float:
    _check_same(f, m)
    fd = f.as_float64().reshape(f.bands, -1)
    md = m.as_float64().reshape(m.bands, -1)
    means = md.mean(axis=1)
    if np.any(means == 0.0):
        raise DegenerateWindowError("reference band with zero mean")
    diff = fd - md
    rmse = np.sqrt(np.mean(diff * diff, axis=1))
    return float(100.0 / ratio * np.sqrt(np.mean((rmse / means) ** 2)))


def _pairwise_q(img: np.ndarray, cfg: QConfig) -> np.ndarray:
    """Upper-triangle Q between bands, pairs ordered (0,1), (0,2), ..., (B-2,B-1)."""
    nb = img.shape[0]
    return np.array([q_index(img[l], img[n], cfg) for l in range(nb - 1) for n in range(l + 1, nb)])


def d_lambda(f: Raster, ms_lr: Raster, cfg: QConfig = QNR_CONFIG) -> float:
    """Spectral distortion: mean |Q(f_l, f_n) - Q(ms_l, ms_n)| over band pairs, each at its own scale."""
    if f.bands != ms_lr.bands:
        raise ShapeMismatchError(f"band counts differ: {f.bands} vs {ms_lr.bands}")
    if f.bands < 2:
        raise ShapeMismatchError("D_lambda needs at least 2 bands")
    qf = _pairwise_q(f.as_float64(), cfg.fitted(f.height, f.width))
    qm = _pairwise_q(ms_lr.as_float64(), cfg.fitted(ms_lr.height, ms_lr.width))
    return float(np.mean(np.abs(qf - qm)))


def d_s(f: Raster, pan: Raster, ms_lr: Raster, pan_lr: Raster, cfg: QConfig = QNR_CONFIG) -> float:
    """Spatial distortion: mean |Q(f_b, pan) - Q(ms_b, pan_lr)| over bands."""
    if pan.bands != 1 or pan_lr.bands != 1:
        raise GeometryError("pan and pan_lr must be single-band")
    if f.shape[1:] != pan.shape[1:]:
        raise GeometryError(f"fused {f.shape[1:]} and pan {pan.shape[1:]} differ in size")
    if ms_lr.shape[1:] != pan_lr.shape[1:]:
        raise GeometryError(f"ms_lr {ms_lr.shape[1:]} and pan_lr {pan_lr.shape[1:]} differ in size")
    if f.bands != ms_lr.bands:
        raise ShapeMismatchError(f"band counts differ: {f.bands} vs {ms_lr.bands}")
    hi = cfg.fitted(f.height, f.width)
    lo = cfg.fitted(ms_lr.height, ms_lr.width)
    fd, pd = f.as_float64(), pan.as_float64()[0]
    md, pld = ms_lr.as_float64(), pan_lr.as_float64()[0]
    diffs = [abs(q_index(fd[b], pd, hi) - q_index(md[b], pld, lo)) for b in range(f.bands)]
    return float(np.mean(diffs))


def qnr(d_lambda_value: float, d_s_value: float) -> float:
    for name, v in (("d_lambda", d_lambda_value), ("d_s", d_s_value)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    return (1.0 - d_lambda_value) * (1.0 - d_s_value)


@dataclass
class MetricReport:
    """Averaged metrics; fields left as None were not computed in the chosen mode."""

    uiqi: float | None = None
    sam_degrees: float | None = None
    ergas: float | None = None
    d_lambda: float | None = None
    d_s: float | None = None
    qnr: float | None = None

    SIMULATED = ("uiqi", "sam_degrees", "ergas")
    ACTUAL = ("d_lambda", "d_s", "qnr")

    def items(self) -> list[tuple[str, float]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self) if getattr(self, f.name) is not None]

    def to_text(self) -> str:
        return "".join(f"{k}={v:.9g}\n" for k, v in self.items())

    @classmethod
    def from_text(cls, text: str) -> "MetricReport":
        known = {f.name for f in fields(cls)}
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            if key not in known:
                raise ValueError(f"unknown metric {key!r}")
            values[key] = float(value)
        return cls(**values)

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}
