"""Intra-band, inter-band and combined IIB losses with analytic gradients.

For one window of N samples write A = 4 s_xy mx my and
D = (vx + vy)(mx^2 + my^2) + eps, so Q = A / D. With dx_i = x_i - mx,

    dA/dx_i = 4 my (s_xy / N + mx dy_i / (N - 1))
    dD/dx_i = 2 (mx^2 + my^2) dx_i / (N - 1) + 2 (vx + vy) mx / N
    dQ/dx_i = (dA/dx_i - Q dD/dx_i) / D

and dQ/dy is the same expression with x and y exchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ShapeMismatchError
from .quality import QConfig, q_terms, window_stats, windows
from .raster import Raster

LOSS_Q_CONFIG = QConfig(window=8, stride=4, epsilon=1e-8)


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1.0
    q: QConfig = field(default_factory=lambda: LOSS_Q_CONFIG)
    normalize: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError(f"alpha must be finite and >= 0, got {self.alpha}")


@dataclass(frozen=True)
class LossReport:
    intra: float
    inter: float
    total: float
    grad: Raster


def _window_grad(wx: np.ndarray, wy: np.ndarray, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Local Q and dQ/dx for stacked windows (..., W, W)."""
    n = wx.shape[-1] * wx.shape[-2]
    s = window_stats(wx, wy)
    num, den = q_terms(s, epsilon)
    q = num / den
    e = (..., None, None)
    dx = wx - s.mean_x[e]
    dy = wy - s.mean_y[e]
    mx, my = s.mean_x[e], s.mean_y[e]
    d_num = 4.0 * my * (s.cov_xy[e] / n + mx * dy / (n - 1))
    d_den = (
        2.0 * (s.mean_x * s.mean_x + s.mean_y * s.mean_y)[e] * dx / (n - 1)
        + 2.0 * (s.var_x + s.var_y)[e] * mx / n
    )
    return q, (d_num - q[e] * d_den) / den[e]


def q_window_grad(x, y, epsilon: float) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of local Q with respect to every sample of x and of y."""
    if not epsilon > 0.0:
        raise ValueError("q_window_grad needs epsilon > 0")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatchError(f"window shapes differ: {x.shape} vs {y.shape}")
    if x.ndim != 2 or x.size < 2:
        raise ShapeMismatchError(f"expected a 2-D window with >= 2 samples, got {x.shape}")
    _, gx = _window_grad(x, y, epsilon)
    _, gy = _window_grad(y, x, epsilon)
    return gx, gy


def _scatter_windows(g: np.ndarray, shape: tuple[int, int], stride: int) -> np.ndarray:
    """Sum per-window gradients (nh, nw, W, W) back onto the band, in fixed offset order."""
    nh, nw, win, _ = g.shape
    out = np.zeros(shape)
    for di in range(win):
        for dj in range(win):
            out[di : di + stride * (nh - 1) + 1 : stride, dj : dj + stride * (nw - 1) + 1 : stride] += g[:, :, di, dj]
    return out


def q_index_grad(x: np.ndarray, y: np.ndarray, cfg: QConfig) -> tuple[float, np.ndarray, np.ndarray]:
    """Windowed mean Q with gradients w.r.t. both bands (no window exclusion)."""
    wx, wy = windows(x, cfg), windows(y, cfg)
    nwin = wx.shape[0] * wx.shape[1]
    q, gx = _window_grad(wx, wy, cfg.epsilon)
    _, gy = _window_grad(wy, wx, cfg.epsilon)
    value = float(np.sum(q) / nwin)
    return (
        value,
        _scatter_windows(gx, x.shape, cfg.stride) / nwin,
        _scatter_windows(gy, y.shape, cfg.stride) / nwin,
    )


def q_index_smooth(x: np.ndarray, y: np.ndarray, cfg: QConfig) -> float:
    """Mean Q over all windows with the stabilizer; the value differentiated by the loss."""
    num, den = q_terms(window_stats(windows(x, cfg), windows(y, cfg)), cfg.epsilon)
    q = num / den
    return float(np.sum(q) / q.size)


def _check(f: Raster, m: Raster) -> None:
    if f.shape != m.shape:
        raise ShapeMismatchError(f"fused {f.shape} and target {m.shape} differ")


def intra_loss(f: Raster, m: Raster, cfg: LossConfig = LossConfig()) -> tuple[float, Raster]:
    """Squared error between same-index bands, divided by the sample count when normalized."""
    _check(f, m)
    diff = f.as_float64() - m.as_float64()
    count = diff.size if cfg.normalize else 1
    return float(np.sum(diff * diff) / count), Raster(2.0 * diff / count)


def _pairs(nb: int) -> list[tuple[int, int]]:
    return [(l, n) for l in range(nb - 1) for n in range(l + 1, nb)]


def inter_loss(f: Raster, m: Raster, cfg: LossConfig = LossConfig(), *, with_grad: bool = True):
    """Squared mismatch of pairwise band Q between fused and target.

    Returns ``(value, grad)``; ``grad`` is None when ``with_grad`` is False.
    """
    _check(f, m)
    if f.bands < 2:
        raise GeometryError("inter-band loss needs at least 2 bands")
    qcfg = cfg.q
    if qcfg.window > min(f.height, f.width):
        raise GeometryError(f"window {qcfg.window} does not fit {f.height}x{f.width}")
    fd, md = f.as_float64(), m.as_float64()
    pairs = _pairs(f.bands)
    scale = len(pairs) if cfg.normalize else 1
    total = 0.0
    grad = np.zeros_like(fd) if with_grad else None
    for l, n in pairs:
        q_target = q_index_smooth(md[l], md[n], qcfg)
        if with_grad:
            q_fused, gl, gn = q_index_grad(fd[l], fd[n], qcfg)
        else:
            q_fused = q_index_smooth(fd[l], fd[n], qcfg)
        diff = q_fused - q_target
        total += diff * diff
        if with_grad:
            coef = 2.0 * diff / scale
            grad[l] += coef * gl
            grad[n] += coef * gn
    value = total / scale
    return value, (Raster(grad) if with_grad else None)


def iib_loss(f: Raster, m: Raster, cfg: LossConfig = LossConfig()) -> LossReport:
    """intra + alpha * inter, with the matching gradient."""
    intra, g_intra = intra_loss(f, m, cfg)
    inter, g_inter = inter_loss(f, m, cfg)
    total = intra + cfg.alpha * inter
    if cfg.alpha == 0.0:
        grad = g_intra
    else:
        grad = Raster(g_intra.data + cfg.alpha * g_inter.data)
    return LossReport(intra=intra, inter=inter, total=total, grad=grad)
