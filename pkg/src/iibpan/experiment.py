"""L2 versus IIB training on synthetic data: the desk-scale comparison run."""

from __future__ import annotations

from dataclasses import dataclass, field

from .loss import LossConfig
from .quality import MetricReport
from .refnet import EvalConfig, Network, StepRecord, TrainConfig, evaluate, init_network, train
from .simulate import make_dataset

TRAIN_COUNT = 64
TEST_COUNT = 16
SCENE_SIZE = 128  # PAN scale; triples are 32x32
TEST_SEED_OFFSET = 500


@dataclass
class RunResult:
    network: Network
    history: list[StepRecord]
    report: MetricReport


@dataclass
class Comparison:
    seed: int
    runs: dict[str, RunResult] = field(default_factory=dict)


def compare_losses(seed: int, steps: int = 500, bands: int = 4, ratio: int = 4, alpha: float = 1.0,
                   loss: LossConfig | None = None, train_count: int = TRAIN_COUNT,
                   test_count: int = TEST_COUNT, size: int = SCENE_SIZE) -> Comparison:
    """Train identically seeded L2 and IIB networks and evaluate both on held-out scenes.

    Scene seeds: training ``1000*seed + i``, testing ``1000*seed + 500 + i``.
    Network initialization and batch order both use ``seed``.
    """
    loss = loss or LossConfig()
    loss = LossConfig(alpha=alpha, q=loss.q, normalize=loss.normalize)
    train_set, _ = make_dataset(train_count, bands=bands, size=size, ratio=ratio, seed=1000 * seed)
    test_set, test_pans = make_dataset(test_count, bands=bands, size=size, ratio=ratio,
                                       seed=1000 * seed + TEST_SEED_OFFSET)
    net0 = init_network(bands, seed=seed)
    out = Comparison(seed)
    for kind in ("l2", "iib"):
        cfg = TrainConfig(loss_kind=kind, loss=loss, steps=steps, seed=seed)
        net, history = train(net0, train_set, cfg)
        report = evaluate(net, test_set, test_pans, EvalConfig(ratio=ratio))
        out.runs[kind] = RunResult(net, history, report)
    return out
