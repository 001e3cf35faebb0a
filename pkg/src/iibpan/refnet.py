"""Three-layer PNN-style fusion network in plain numpy, trained with Adam.

The input is the upsampled MS stacked with PAN (B + 1 channels); each layer
is a same-size zero-padded cross-correlation plus bias, with ReLU on the
hidden layers and a linear output of B bands.
"""

from __future__ import annotations

import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArchitectureError, BadMagicError, GeometryError, TruncatedFileError, UnsupportedVersionError
from .loss import LossConfig, iib_loss, inter_loss, intra_loss
from .prng import SplitMix64
from .quality import QNR_CONFIG, UIQI_CONFIG, MetricReport, QConfig, d_lambda, d_s, ergas, qnr, sam, uiqi
from .raster import Raster, SampleTriple
from .simulate import degrade, upsample

log = logging.getLogger(__name__)

NET_MAGIC = b"IIBN"
NET_VERSION = 1
_NET_HEADER = struct.Struct("<4sHH")
_LAYER_HEADER = struct.Struct("<HHHB")


@dataclass
class ConvLayer:
    kernel: int
    in_channels: int
    out_channels: int
    weights: np.ndarray  # (out, in, k, k)
    biases: np.ndarray  # (out,)
    relu: bool

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(
            self.out_channels, self.in_channels, self.kernel, self.kernel
        )
        self.biases = np.asarray(self.biases, dtype=np.float64).reshape(self.out_channels)


@dataclass
class Network:
    layers: list[ConvLayer]

    def __post_init__(self):
        validate_layers(self.layers)

    @property
    def bands(self) -> int:
        return self.layers[-1].out_channels

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases, layer by layer; the order Adam and the file format use."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.biases))
        return out

    def copy(self) -> "Network":
        return Network([
            ConvLayer(l.kernel, l.in_channels, l.out_channels, l.weights.copy(), l.biases.copy(), l.relu)
            for l in self.layers
        ])

    def __eq__(self, other):
        if not isinstance(other, Network) or len(self.layers) != len(other.layers):
            return False
        for a, b in zip(self.layers, other.layers):
            if (a.kernel, a.in_channels, a.out_channels, a.relu) != (b.kernel, b.in_channels, b.out_channels, b.relu):
                return False
            if a.weights.tobytes() != b.weights.tobytes() or a.biases.tobytes() != b.biases.tobytes():
                return False
        return True


def validate_layers(layers: Sequence[ConvLayer]) -> None:
    if len(layers) < 1:
        raise ArchitectureError("network needs at least one layer")
    for i, layer in enumerate(layers):
        if layer.kernel < 1 or layer.kernel % 2 == 0:
            raise ArchitectureError(f"layer {i}: kernel {layer.kernel} must be odd")
        if i + 1 < len(layers) and layer.out_channels != layers[i + 1].in_channels:
            raise ArchitectureError(
                f"layer {i} emits {layer.out_channels} channels, layer {i + 1} expects {layers[i + 1].in_channels}"
            )
    last = layers[-1]
    if last.relu:
        raise ArchitectureError("output layer must be linear")
    if layers[0].in_channels != last.out_channels + 1:
        raise ArchitectureError(
            f"first layer takes {layers[0].in_channels} channels; expected bands + 1 = {last.out_channels + 1}"
        )


def init_network(bands: int, channels: Sequence[int] = (16, 8, None), kernels: Sequence[int] = (9, 5, 5),
                 seed: int = 0) -> Network:
    """Glorot-uniform weights from SplitMix64, zero biases.

    ``channels`` lists every layer's output width; a trailing ``None`` stands
    for ``bands``.
    """
    channels = [bands if c is None else int(c) for c in channels]
    kernels = [int(k) for k in kernels]
    if len(channels) != len(kernels) or len(channels) < 2:
        raise ArchitectureError("channels and kernels must be equal-length lists of >= 2 layers")
    if any(k < 1 or k % 2 == 0 for k in kernels):
        raise ArchitectureError(f"kernel sizes must be odd, got {kernels}")
    if channels[-1] != bands:
        raise ArchitectureError(f"last layer must emit {bands} bands, got {channels[-1]}")
    rng = SplitMix64(seed)
    layers = []
    cin = bands + 1
    for i, (cout, k) in enumerate(zip(channels, kernels)):
        scale = math.sqrt(6.0 / (cin * k * k + cout * k * k))
        w = (2.0 * rng.uniform(cout * cin * k * k) - 1.0) * scale
        layers.append(ConvLayer(k, cin, cout, w, np.zeros(cout), relu=i < len(channels) - 1))
        cin = cout
    return Network(layers)


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(C, H, W) -> (H*W, C*k*k) patches of the zero-padded input."""
    c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    patches = sliding_window_view(xp, (k, k), axis=(1, 2))  # (C, H, W, k, k)
    return patches.transpose(1, 2, 0, 3, 4).reshape(h * w, c * k * k)


def _col2im(cols: np.ndarray, shape: tuple[int, int, int], k: int) -> np.ndarray:
    c, h, w = shape
    p = k // 2
    patches = cols.reshape(h, w, c, k, k)
    out = np.zeros((c, h + 2 * p, w + 2 * p))
    for di in range(k):
        for dj in range(k):
            out[:, di : di + h, dj : dj + w] += patches[:, :, :, di, dj].transpose(2, 0, 1)
    return out[:, p : p + h, p : p + w]


def _stack_inputs(net: Network, lms: Raster, pan: Raster) -> np.ndarray:
    if pan.bands != 1:
        raise GeometryError(f"pan must have 1 band, got {pan.bands}")
    if lms.shape[1:] != pan.shape[1:]:
        raise GeometryError(f"lms {lms.shape[1:]} and pan {pan.shape[1:]} differ in size")
    if lms.bands + 1 != net.layers[0].in_channels:
        raise ArchitectureError(
            f"network expects {net.layers[0].in_channels - 1} bands, input has {lms.bands}"
        )
    return np.concatenate([lms.as_float64(), pan.as_float64()], axis=0)


def _forward(net: Network, x: np.ndarray):
    """Output plus the per-layer (cols, pre-activation) cache backward needs."""
    cache = []
    h, w = x.shape[1:]
    for layer in net.layers:
        cols = _im2col(x, layer.kernel)
        pre = cols @ layer.weights.reshape(layer.out_channels, -1).T + layer.biases
        cache.append((cols, pre))
        act = np.maximum(pre, 0.0) if layer.relu else pre
        x = act.T.reshape(layer.out_channels, h, w)
    return x, cache


def forward(net: Network, lms: Raster, pan: Raster) -> Raster:
    out, _ = _forward(net, _stack_inputs(net, lms, pan))
    return Raster(out)


def _backward(net: Network, cache, grad_out: np.ndarray) -> list[np.ndarray]:
    h, w = grad_out.shape[1:]
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    g = grad_out.reshape(grad_out.shape[0], -1).T  # (H*W, out)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        cols, pre = cache[i]
        if layer.relu:
            g = g * (pre > 0.0)
        grads[2 * i] = (g.T @ cols).reshape(layer.weights.shape)
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            dcols = g @ layer.weights.reshape(layer.out_channels, -1)
            dx = _col2im(dcols, (layer.in_channels, h, w), layer.kernel)
            g = dx.reshape(layer.in_channels, -1).T
    return grads


def backward(net: Network, lms: Raster, pan: Raster, grad_out: Raster) -> list[np.ndarray]:
    """Parameter gradients (same order as ``Network.parameters``) for an upstream output gradient."""
    x = _stack_inputs(net, lms, pan)
    if grad_out.shape != (net.bands,) + x.shape[1:]:
        raise GeometryError(f"grad_out shape {grad_out.shape} does not match output {(net.bands,) + x.shape[1:]}")
    _, cache = _forward(net, x)
    return _backward(net, cache, grad_out.as_float64())


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "iib"
    loss: LossConfig = field(default_factory=LossConfig)
    steps: int = 500
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    batch: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.loss_kind not in ("l2", "iib"):
            raise ValueError(f"loss_kind must be 'l2' or 'iib', got {self.loss_kind!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    step: int
    intra: float
    inter: float
    total: float


def sample_loss(net: Network, triple: SampleTriple, cfg: TrainConfig):
    """(intra, inter, total, parameter grads) for one triple."""
    x = _stack_inputs(net, triple.lms, triple.pan)
    out, cache = _forward(net, x)
    fused = Raster(out)
    if cfg.loss_kind == "iib":
        rep = iib_loss(fused, triple.target, cfg.loss)
        intra, inter, total, g = rep.intra, rep.inter, rep.total, rep.grad
    else:
        intra, g = intra_loss(fused, triple.target, cfg.loss)
        inter = inter_loss(fused, triple.target, cfg.loss, with_grad=False)[0] if fused.bands > 1 else 0.0
        total = intra
    return intra, inter, total, _backward(net, cache, g.as_float64())


class _BatchSampler:
    """Epoch-wise shuffles from SplitMix64; batches may straddle epochs."""

    def __init__(self, n: int, seed: int):
        self.n = n
        self.rng = SplitMix64(seed)
        self.order: list[int] = []

    def take(self, k: int) -> list[int]:
        out = []
        while len(out) < k:
            if not self.order:
                self.order = self.rng.permutation(self.n)
            out.append(self.order.pop(0))
        return out


def train(net: Network, dataset: Sequence[SampleTriple], cfg: TrainConfig,
          callback: Callable[[StepRecord], None] | None = None) -> tuple[Network, list[StepRecord]]:
    """Adam training; returns a new network and the per-step batch losses."""
    if not dataset:
        raise ValueError("empty dataset")
    net = net.copy()
    params = net.parameters()
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    sampler = _BatchSampler(len(dataset), cfg.seed)
    history = []
    divisor = cfg.batch if cfg.loss.normalize else 1
    for step in range(1, cfg.steps + 1):
        grads = [np.zeros_like(p) for p in params]
        intra = inter = total = 0.0
        for idx in sampler.take(cfg.batch):
            a, b, c, g = sample_loss(net, dataset[idx], cfg)
            intra += a
            inter += b
            total += c
            for acc, gi in zip(grads, g):
                acc += gi
        rec = StepRecord(step, intra / divisor, inter / divisor, total / divisor)
        history.append(rec)
        if callback is not None:
            callback(rec)
        c1 = 1.0 - cfg.beta1 ** step
        c2 = 1.0 - cfg.beta2 ** step
        for p, g, a, v in zip(params, grads, m1, m2):
            g /= divisor
            a *= cfg.beta1
            a += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (a / c1) / (np.sqrt(v / c2) + cfg.adam_epsilon)
        if step % 100 == 0:
            log.debug("step %d total=%.6g", step, rec.total)
    return net, history


@dataclass(frozen=True)
class EvalConfig:
    ratio: int = 4
    uiqi: QConfig = UIQI_CONFIG
    qnr: QConfig = QNR_CONFIG
    mode: str = "both"  # "simulated", "actual" or "both"

    def __post_init__(self):
        if self.mode not in ("simulated", "actual", "both"):
            raise ValueError(f"mode must be simulated, actual or both, got {self.mode!r}")


Fuser = Callable[[Raster, Raster], Raster]


def evaluate(net: Network | Fuser, triples: Sequence[SampleTriple], pan_full: Sequence[Raster] | None = None,
             cfg: EvalConfig = EvalConfig()) -> MetricReport:
    """Average full-reference and no-reference metrics over a test set.

    Simulated metrics fuse each triple and compare with its target. The
    no-reference metrics fuse at full scale when ``pan_full`` is given
    (upsampled target + full pan, target as the native MS); otherwise they
    treat the triple as the full-scale data and its degraded target as MS.
    ``net`` may also be any ``fuse(lms, pan) -> Raster`` callable.
    """
    if not triples:
        raise ValueError("empty test set")
    if pan_full is not None and len(pan_full) != len(triples):
        raise GeometryError(f"{len(pan_full)} full-scale pans for {len(triples)} triples")
    fuse = net if callable(net) else (lambda lms, pan: forward(net, lms, pan))
    sim, act = [], []
    for i, t in enumerate(triples):
        if cfg.mode in ("simulated", "both"):
            f = fuse(t.lms, t.pan)
            sim.append((uiqi(f, t.target, cfg.uiqi), sam(f, t.target), ergas(f, t.target, cfg.ratio)))
        if cfg.mode in ("actual", "both"):
            if pan_full is not None:
                pan, ms_lr, pan_lr = pan_full[i], t.target, t.pan
                f = fuse(upsample(ms_lr, cfg.ratio), pan)
            else:
                pan, ms_lr, pan_lr = t.pan, degrade(t.target, cfg.ratio), degrade(t.pan, cfg.ratio)
                f = fuse(t.lms, t.pan)
            dl = d_lambda(f, ms_lr, cfg.qnr)
            ds = d_s(f, pan, ms_lr, pan_lr, cfg.qnr)
            act.append((dl, ds, qnr(min(dl, 1.0), min(ds, 1.0))))
    report = MetricReport()
    if sim:
        report.uiqi, report.sam_degrees, report.ergas = (float(v) for v in np.mean(sim, axis=0))
    if act:
        report.d_lambda, report.d_s, report.qnr = (float(v) for v in np.mean(act, axis=0))
    return report


def save_network(path, net: Network) -> None:
    parts = [_NET_HEADER.pack(NET_MAGIC, NET_VERSION, len(net.layers))]
    for layer in net.layers:
        parts.append(_LAYER_HEADER.pack(layer.kernel, layer.in_channels, layer.out_channels, int(layer.relu)))
        parts.append(layer.weights.astype("<f8").tobytes())
        parts.append(layer.biases.astype("<f8").tobytes())
    with open(os.fspath(path), "wb") as fh:
        fh.write(b"".join(parts))


def load_network(path) -> Network:
    with open(os.fspath(path), "rb") as fh:
        blob = fh.read()
    if blob[:4] != NET_MAGIC:
        raise BadMagicError(f"{path}: magic {blob[:4]!r} is not {NET_MAGIC!r}")
    if len(blob) < _NET_HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated")
    _, version, count = _NET_HEADER.unpack_from(blob)
    if version != NET_VERSION:
        raise UnsupportedVersionError(f"{path}: network version {version} (supported: {NET_VERSION})")
    pos = _NET_HEADER.size
    layers = []
    for i in range(count):
        if len(blob) < pos + _LAYER_HEADER.size:
            raise TruncatedFileError(f"{path}: layer {i} header truncated")
        k, cin, cout, act = _LAYER_HEADER.unpack_from(blob, pos)
        pos += _LAYER_HEADER.size
        nw, nb = cout * cin * k * k, cout
        if len(blob) < pos + 8 * (nw + nb):
            raise TruncatedFileError(f"{path}: layer {i} parameters truncated")
        w = np.frombuffer(blob, "<f8", nw, pos).astype(np.float64)
        pos += 8 * nw
        b = np.frombuffer(blob, "<f8", nb, pos).astype(np.float64)
        pos += 8 * nb
        layers.append(ConvLayer(k, cin, cout, w, b, relu=bool(act)))
    if pos != len(blob):
        raise ArchitectureError(f"{path}: {len(blob) - pos} trailing bytes after {count} layers")
    return Network(layers)
