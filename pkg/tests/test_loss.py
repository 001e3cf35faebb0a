import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iibpan.errors import GeometryError, ShapeMismatchError
from iibpan.gradcheck import check_iib, check_inter, check_q_window
from iibpan.loss import (
    LossConfig,
    iib_loss,
    inter_loss,
    intra_loss,
    q_index_smooth,
    q_window_grad,
)
from iibpan.quality import QConfig
from iibpan.raster import Raster

SMALL_Q = QConfig(4, 2, 1e-8)


def test_intra_loss_unit_offset():
    m = Raster(np.zeros((2, 3, 3)))
    f = Raster(np.ones((2, 3, 3)))
    value, grad = intra_loss(f, m)
    assert value == 1.0
    assert np.all(grad.data == 2.0 / 18)
    raw, raw_grad = intra_loss(f, m, LossConfig(normalize=False))
    assert raw == 18.0
    assert np.all(raw_grad.data == 2.0)


def test_inter_loss_proportional_bands(rng):
    base = rng.random((8, 8)) + 0.5
    m = Raster(np.stack([base, 2 * base, 3 * base]))
    # scaling whole bands keeps every pairwise correlation, so only luminance/contrast terms move
    value, _ = inter_loss(m, m, LossConfig(q=SMALL_Q))
    assert value == 0.0
    f = Raster(np.stack([base, base, base]))
    assert inter_loss(f, m, LossConfig(q=SMALL_Q))[0] > 0.0


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed):
    assert check_q_window(seed).ok
    assert check_inter(seed).ok
    assert check_iib(seed).ok


def test_q_window_grad_symmetry_and_stationarity(rng):
    x = rng.random((5, 5))
    y = rng.random((5, 5))
    gx, gy = q_window_grad(x, y, 1e-8)
    gy2, gx2 = q_window_grad(y, x, 1e-8)
    assert np.array_equal(gx, gx2) and np.array_equal(gy, gy2)
    sx, sy = q_window_grad(x, x, 1e-8)
    assert np.max(np.abs(sx)) < 1e-6 and np.max(np.abs(sy)) < 1e-6
    with pytest.raises(ValueError):
        q_window_grad(x, y, 0.0)
    with pytest.raises(ShapeMismatchError):
        q_window_grad(x, y[:4], 1e-8)


def test_zero_at_target(rng):
    m = Raster(rng.random((3, 16, 16)))
    rep = iib_loss(m, m)
    assert rep.intra == 0.0 and rep.inter <= 1e-12 and rep.total <= 1e-12
    assert np.max(np.abs(rep.grad.data)) <= 1e-9


def test_decomposition_and_alpha_zero(rng):
    m = Raster(rng.random((3, 16, 16)))
    f = Raster(rng.random((3, 16, 16)))
    rep = iib_loss(f, m, LossConfig(alpha=0.7))
    assert rep.total == rep.intra + 0.7 * rep.inter
    zero = iib_loss(f, m, LossConfig(alpha=0.0))
    intra, g = intra_loss(f, m)
    assert zero.total == intra
    assert np.array_equal(zero.grad.data, g.data)
    with pytest.raises(ValueError):
        LossConfig(alpha=-1.0)


def test_inter_loss_band_permutation(rng):
    m = rng.random((4, 16, 16))
    f = rng.random((4, 16, 16))
    perm = [2, 0, 3, 1]
    a = inter_loss(Raster(f), Raster(m))[0]
    b = inter_loss(Raster(f[perm]), Raster(m[perm]))[0]
    assert a == pytest.approx(b, abs=1e-12)


def test_inter_loss_geometry_errors(rng):
    one = Raster(rng.random((1, 16, 16)))
    with pytest.raises(GeometryError):
        inter_loss(one, one)
    tiny = Raster(rng.random((3, 4, 4)))
    with pytest.raises(GeometryError):
        inter_loss(tiny, tiny)


def test_normalize_scaling(rng):
    m = Raster(rng.random((3, 16, 16)))
    f = Raster(rng.random((3, 16, 16)))
    norm = inter_loss(f, m)[0]
    raw = inter_loss(f, m, LossConfig(normalize=False))[0]
    assert raw == pytest.approx(3 * norm, rel=1e-12)


def test_smooth_q_of_identical_bands(rng):
    x = rng.random((16, 16))
    assert q_index_smooth(x, x, SMALL_Q) == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_losses_nonnegative(seed, alpha):
    r = np.random.default_rng(seed)
    f = Raster(r.random((3, 8, 8)))
    m = Raster(r.random((3, 8, 8)))
    rep = iib_loss(f, m, LossConfig(alpha=alpha, q=SMALL_Q))
    assert rep.intra >= 0.0 and rep.inter >= 0.0 and rep.total >= 0.0
