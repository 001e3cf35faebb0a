"""Inter- and intra-band loss for pansharpening networks, with fusion quality metrics."""

__version__ = "0.1.0"

from .loss import LossConfig, LossReport, iib_loss, inter_loss, intra_loss, q_window_grad
from .quality import MetricReport, QConfig, d_lambda, d_s, ergas, q_index, q_local, qnr, sam, uiqi
from .raster import Raster, SampleTriple, band_stats, covariance, new_raster, read_brf, write_brf
from .refnet import Network, TrainConfig, evaluate, forward, init_network, load_network, save_network, train
from .simulate import SceneSpec, degrade, make_triple, synth_scene, upsample

__all__ = [
    "LossConfig", "LossReport", "MetricReport", "Network", "QConfig", "Raster", "SampleTriple",
    "SceneSpec", "TrainConfig", "band_stats", "covariance", "d_lambda", "d_s", "degrade", "ergas",
    "evaluate", "forward", "iib_loss", "init_network", "inter_loss", "intra_loss", "load_network",
    "make_triple", "new_raster", "q_index", "q_local", "q_window_grad", "qnr", "read_brf", "sam",
    "save_network", "synth_scene", "train", "uiqi", "upsample", "write_brf",
]
