"""Central finite-difference checks of every analytic gradient in the package."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .loss import LossConfig, iib_loss, inter_loss, q_window_grad
from .quality import QConfig, q_local
from .raster import Raster, SampleTriple
from .refnet import Network, TrainConfig, init_network, sample_loss

FD_STEP = 1e-5
ABS_FLOOR = 1e-8
TOLERANCE = 1e-4


def central_difference(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    out = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        hi = fn(x)
        x[idx] = orig - step
        lo = fn(x)
        x[idx] = orig
        out[idx] = (hi - lo) / (2.0 * step)
    return out


def max_rel_error(analytic, numeric, floor: float = ABS_FLOOR) -> float:
    """Largest relative discrepancy; entries with |analytic| < floor are compared absolutely."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    diff = np.abs(a - n)
    big = np.abs(a) >= floor
    scale = np.where(big, np.maximum(np.abs(a), np.abs(n)), 1.0)
    err = np.where(big, diff / scale, diff)
    return float(err.max()) if err.size else 0.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_error: float

    @property
    def ok(self) -> bool:
        return self.max_rel_error < TOLERANCE


def check_q_window(seed: int, size: int = 8, epsilon: float = 1e-8, corrupt: float = 0.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    x = rng.random((size, size))
    y = rng.random((size, size))
    gx, gy = q_window_grad(x, y, epsilon)
    nx = central_difference(lambda v: q_local(v, y, epsilon), x)
    ny = central_difference(lambda v: q_local(x, v, epsilon), y)
    gx = gx * (1.0 + corrupt)
    return CheckResult("q_window_grad", max(max_rel_error(gx, nx), max_rel_error(gy, ny)))


def _random_pair(seed: int, bands: int, size: int) -> tuple[np.ndarray, Raster]:
    rng = np.random.default_rng(seed)
    return rng.random((bands, size, size)), Raster(rng.random((bands, size, size)))


def check_inter(seed: int, bands: int = 3, size: int = 16, q: QConfig = QConfig(8, 4, 1e-8),
                corrupt: float = 0.0) -> CheckResult:
    f, m = _random_pair(seed, bands, size)
    cfg = LossConfig(q=q)
    _, grad = inter_loss(Raster(f), m, cfg)
    numeric = central_difference(lambda v: inter_loss(Raster(v), m, cfg, with_grad=False)[0], f)
    return CheckResult("inter_loss", max_rel_error(grad.data * (1.0 + corrupt), numeric))


def check_iib(seed: int, bands: int = 3, size: int = 16, q: QConfig = QConfig(8, 4, 1e-8),
              alpha: float = 1.0, corrupt: float = 0.0) -> CheckResult:
    f, m = _random_pair(seed, bands, size)
    cfg = LossConfig(alpha=alpha, q=q)
    rep = iib_loss(Raster(f), m, cfg)
    numeric = central_difference(lambda v: iib_loss(Raster(v), m, cfg).total, f)
    return CheckResult("iib_loss", max_rel_error(rep.grad.data * (1.0 + corrupt), numeric))


def tiny_problem(seed: int, bands: int = 3, size: int = 8) -> tuple[Network, SampleTriple]:
    """Two-layer net and a random triple for end-to-end backprop checks."""
    rng = np.random.default_rng(seed)
    net = init_network(bands, channels=(4, bands), kernels=(3, 3), seed=seed)
    for layer in net.layers:
        layer.biases[:] = rng.normal(0.0, 0.1, layer.biases.shape)
    triple = SampleTriple(
        lms=Raster(rng.random((bands, size, size))),
        pan=Raster(rng.random((1, size, size))),
        target=Raster(rng.random((bands, size, size))),
    )
    return net, triple


def check_network(seed: int, loss_kind: str = "iib", bands: int = 3, size: int = 8,
                  q: QConfig = QConfig(8, 4, 1e-8), corrupt: float = 0.0) -> CheckResult:
    net, triple = tiny_problem(seed, bands, size)
    cfg = TrainConfig(loss_kind=loss_kind, loss=LossConfig(q=q), steps=1)
    *_, grads = sample_loss(net, triple, cfg)
    worst = 0.0
    for param, grad in zip(net.parameters(), grads):
        def total(v, param=param):
            saved = param.copy()
            param[...] = v
            value = sample_loss(net, triple, cfg)[2]
            param[...] = saved
            return value

        numeric = central_difference(total, param)
        worst = max(worst, max_rel_error(grad * (1.0 + corrupt), numeric))
    return CheckResult(f"network_{loss_kind}", worst)


def run_all(seed: int = 0, bands: int = 3, size: int = 16, window: int = 8, stride: int = 4,
            epsilon: float = 1e-8, corrupt: float = 0.0) -> list[CheckResult]:
    """The four checks reported by the ``gradcheck`` command."""
    q = QConfig(window=window, stride=stride, epsilon=epsilon)
    net_size = max(8, window)
    return [
        check_q_window(seed, size=window, epsilon=epsilon, corrupt=corrupt),
        check_inter(seed, bands, size, q, corrupt=corrupt),
        check_iib(seed, bands, size, q, corrupt=corrupt),
        check_network(seed, "iib", bands, net_size, replace(q, window=min(window, net_size)), corrupt=corrupt),
    ]
