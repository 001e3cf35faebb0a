import math

import numpy as np
import pytest

from iibpan.errors import GeometryError
from iibpan.quality import ergas
from iibpan.raster import Raster, covariance, band_stats
from iibpan.simulate import SceneSpec, degrade, make_triple, synth_scene, upsample


def catmull_rom(d, a=-0.5):
    d = abs(d)
    if d <= 1:
        return (a + 2) * d ** 3 - (a + 3) * d ** 2 + 1
    if d < 2:
        return a * d ** 3 - 5 * a * d ** 2 + 8 * a * d - 4 * a
    return 0.0


def naive_bicubic(img, ratio):
    """Per-pixel 4x4 tap evaluation with clamped indices."""
    h, w = img.shape
    out = np.zeros((h * ratio, w * ratio))
    for u in range(h * ratio):
        sy = (u + 0.5) / ratio - 0.5
        iy = math.floor(sy)
        for v in range(w * ratio):
            sx = (v + 0.5) / ratio - 0.5
            ix = math.floor(sx)
            acc = 0.0
            for m in range(iy - 1, iy + 3):
                for n in range(ix - 1, ix + 3):
                    wgt = catmull_rom(sy - m) * catmull_rom(sx - n)
                    acc += wgt * img[min(max(m, 0), h - 1), min(max(n, 0), w - 1)]
            out[u, v] = acc
    return out


def test_degrade_hand_example():
    r = Raster(np.arange(1, 17, dtype=float).reshape(1, 4, 4))
    assert degrade(r, 2).data.ravel().tolist() == [3.5, 5.5, 11.5, 13.5]


@pytest.mark.parametrize("c", [0.1, 0.3, 1 / 3, 0.7])
@pytest.mark.parametrize("ratio", [2, 3, 4])
def test_degrade_and_upsample_keep_constants(c, ratio):
    r = Raster(np.full((2, 12, 12), c))
    small = degrade(r, ratio)
    assert small.shape == (2, 12 // ratio, 12 // ratio)
    assert np.all(small.data == c)
    big = upsample(r, ratio)
    assert big.shape == (2, 12 * ratio, 12 * ratio)
    assert np.all(big.data == c)
    assert np.all(degrade(upsample(small, ratio), ratio).data == c)


def test_identity_ratio(rng):
    r = Raster(rng.random((2, 6, 6)))
    assert degrade(r, 1) == r
    assert upsample(r, 1) == r


def test_degrade_rejects_non_divisible(rng):
    with pytest.raises(GeometryError):
        degrade(Raster(rng.random((1, 6, 6))), 4)


def test_degrade_preserves_mean(rng):
    r = Raster(rng.random((3, 32, 32)))
    for b in range(3):
        assert band_stats(degrade(r, 4), b)[0] == pytest.approx(band_stats(r, b)[0], abs=1e-12)


@pytest.mark.parametrize("ratio", [2, 3, 4])
def test_upsample_matches_naive_oracle(rng, ratio):
    img = rng.random((7, 5))
    ours = upsample(Raster(img), ratio).data[0]
    np.testing.assert_allclose(ours, naive_bicubic(img, ratio), rtol=0, atol=1e-12)


def test_upsample_preserves_ramp_interior():
    ratio = 4
    yy, xx = np.mgrid[0:10, 0:12].astype(float)
    ramp = 0.05 * yy - 0.02 * xx + 0.3
    up = upsample(Raster(ramp), ratio).data[0]
    u = (np.arange(40) + 0.5) / ratio - 0.5
    v = (np.arange(48) + 0.5) / ratio - 0.5
    exact = 0.05 * u[:, None] - 0.02 * v[None, :] + 0.3
    border = 2 * ratio
    err = np.abs(up - exact)[border:-border, border:-border]
    assert err.max() < 1e-9


def test_scene_spec_validation():
    with pytest.raises(GeometryError):
        SceneSpec(height=130, width=128, ratio=4)
    with pytest.raises(GeometryError):
        SceneSpec(ratio=1)


def test_synth_scene_deterministic_and_shaped():
    spec = SceneSpec(bands=4, height=64, width=64, ratio=4, seed=3)
    ms, pan = synth_scene(spec)
    ms2, pan2 = synth_scene(spec)
    assert ms == ms2 and pan == pan2
    assert ms.shape == (4, 16, 16)
    assert pan.shape == (1, 64, 64)
    assert 0.0 <= pan.data.min() and pan.data.max() <= 1.0
    other, _ = synth_scene(SceneSpec(bands=4, height=64, width=64, ratio=4, seed=4))
    assert other != ms


def test_synth_scene_wv3_band_count():
    ms, pan = synth_scene(SceneSpec(bands=5, height=32, width=32, ratio=4, seed=0))
    assert ms.bands == 5 and pan.bands == 1


def test_adjacent_bands_correlated():
    corr = []
    for seed in range(10):
        ms, _ = synth_scene(SceneSpec(bands=4, height=128, width=128, ratio=4, seed=seed))
        d = ms.as_float64()
        for b in range(3):
            c = covariance(d[b], d[b + 1])
            corr.append(c / math.sqrt(covariance(d[b], d[b]) * covariance(d[b + 1], d[b + 1])))
    assert np.mean(corr) > 0.5


def test_make_triple_full_size_geometry():
    ms = Raster(np.random.default_rng(0).random((4, 64, 64)))
    pan = Raster(np.random.default_rng(1).random((1, 256, 256)))
    t = make_triple(ms, pan, 4)
    assert t.lms.shape == (4, 64, 64)
    assert t.pan.shape == (1, 64, 64)
    assert t.target.shape == (4, 64, 64)
    assert t.target is ms


def test_make_triple_constant_ms():
    ms = Raster(np.full((4, 16, 16), 0.37))
    t = make_triple(ms, Raster(np.zeros((1, 64, 64))), 4)
    assert t.lms == ms


def test_make_triple_loses_detail():
    ms, pan = synth_scene(SceneSpec(bands=4, height=128, width=128, ratio=4, seed=0))
    t = make_triple(ms, pan, 4)
    assert ergas(t.lms, t.target, 4) > 0


def test_make_triple_geometry_errors(rng):
    ms = Raster(rng.random((4, 16, 16)))
    with pytest.raises(GeometryError):
        make_triple(ms, Raster(rng.random((1, 60, 64))), 4)
    with pytest.raises(GeometryError):
        make_triple(ms, Raster(rng.random((2, 64, 64))), 4)
