import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iibpan.errors import (
    BadMagicError,
    BandOutOfRangeError,
    DimensionMismatchError,
    NonFiniteSampleError,
    ShapeMismatchError,
    TooFewSamplesError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from iibpan.raster import Raster, SampleTriple, band_stats, covariance, new_raster, read_brf, write_brf


def test_new_raster_zero_image():
    r = new_raster(1, 2, 2, [0, 0, 0, 0])
    assert r.shape == (1, 2, 2)
    assert np.all(r.data == 0)


def test_new_raster_length_mismatch():
    with pytest.raises(DimensionMismatchError):
        new_raster(2, 2, 2, [0.0] * 7)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_new_raster_rejects_non_finite(bad):
    with pytest.raises(NonFiniteSampleError):
        new_raster(1, 1, 1, [bad])


def test_raster_is_planar_band_major():
    r = new_raster(2, 2, 3, range(12))
    assert r.band(1)[0, 0] == 6
    assert r.band(0)[1, 2] == 5


def test_raster_is_immutable():
    r = new_raster(1, 2, 2, [1, 2, 3, 4])
    with pytest.raises(ValueError):
        r.data[0, 0, 0] = 9


def test_band_stats_constant():
    r = Raster(np.full((1, 3, 3), 0.25))
    assert band_stats(r, 0) == (0.25, 0.0)


def test_band_stats_hand_values():
    mean, var = band_stats(new_raster(1, 2, 2, [1, 2, 3, 4]), 0)
    assert mean == 2.5
    assert var == pytest.approx(5.0 / 3.0, abs=1e-15)
    assert band_stats(new_raster(1, 1, 2, [0, 1]), 0) == (0.5, 0.5)


def test_band_stats_single_pixel_and_range():
    r = new_raster(2, 1, 1, [3.0, 4.0])
    assert band_stats(r, 1) == (4.0, 0.0)
    with pytest.raises(BandOutOfRangeError):
        band_stats(r, 2)


def test_covariance_examples(rng):
    assert covariance([1, 2, 3, 4], [2, 3, 4, 5]) == pytest.approx(5.0 / 3.0, abs=1e-15)
    x = rng.random((5, 5))
    assert covariance(x, x) == band_stats(Raster(x), 0)[1]
    assert covariance(x, np.full((5, 5), 0.7)) == 0.0


def test_covariance_errors():
    with pytest.raises(ShapeMismatchError):
        covariance([1, 2, 3], [1, 2])
    with pytest.raises(TooFewSamplesError):
        covariance([1.0], [2.0])


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False, width=32)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30)), elements=finite),
       arrays(np.float64, st.tuples(st.integers(2, 30)), elements=finite))
def test_covariance_symmetric_and_variance_nonnegative(x, y):
    n = min(x.size, y.size)
    x, y = x[:n], y[:n]
    assert covariance(x, y) == covariance(y, x)
    _, var = band_stats(Raster(x.reshape(1, 1, -1)), 0)
    assert var >= 0.0
    assert (var == 0.0) == bool(np.all(x == x[0]))


def test_brf_round_trip(tmp_path, rng):
    r = Raster(rng.random((3, 5, 7)).astype(np.float32))
    path = tmp_path / "a.brf"
    write_brf(path, r)
    back = read_brf(path)
    assert back == r
    assert back.data.tobytes() == r.data.tobytes()


def test_brf_layout(tmp_path):
    r = new_raster(2, 1, 2, [1, 2, 3, 4])
    path = tmp_path / "a.brf"
    write_brf(path, r)
    blob = path.read_bytes()
    assert blob[:4] == b"IIBR"
    assert struct.unpack_from("<HHII", blob, 4) == (1, 2, 1, 2)
    assert np.frombuffer(blob[16:], "<f4").tolist() == [1, 2, 3, 4]
    assert len(blob) == 16 + 4 * 4


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6), st.data())
def test_brf_round_trip_property(tmp_path_factory, b, h, w, data):
    samples = data.draw(arrays(np.float32, (b, h, w), elements=finite))
    r = Raster(samples)
    path = tmp_path_factory.mktemp("brf") / "r.brf"
    write_brf(path, r)
    assert read_brf(path).data.tobytes() == r.data.tobytes()


def test_brf_bad_magic(tmp_path):
    path = tmp_path / "x.brf"
    path.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(BadMagicError):
        read_brf(path)


def test_brf_truncated(tmp_path):
    path = tmp_path / "t.brf"
    path.write_bytes(struct.pack("<4sHHII", b"IIBR", 1, 2, 2, 2) + np.zeros(7, "<f4").tobytes())
    with pytest.raises(TruncatedFileError):
        read_brf(path)


def test_brf_version_and_nonfinite(tmp_path):
    path = tmp_path / "v.brf"
    path.write_bytes(struct.pack("<4sHHII", b"IIBR", 2, 1, 1, 1) + np.zeros(1, "<f4").tobytes())
    with pytest.raises(UnsupportedVersionError):
        read_brf(path)
    path.write_bytes(struct.pack("<4sHHII", b"IIBR", 1, 1, 1, 1) + np.array([np.nan], "<f4").tobytes())
    with pytest.raises(NonFiniteSampleError):
        read_brf(path)


def test_write_rejects_float32_overflow(tmp_path):
    with pytest.raises(NonFiniteSampleError):
        write_brf(tmp_path / "o.brf", Raster(np.full((1, 1, 1), 1e300)))


def test_sample_triple_invariants():
    a = Raster(np.zeros((3, 4, 4)))
    p = Raster(np.zeros((1, 4, 4)))
    SampleTriple(a, p, a)
    with pytest.raises(ShapeMismatchError):
        SampleTriple(a, a, a)
    with pytest.raises(ShapeMismatchError):
        SampleTriple(a, Raster(np.zeros((1, 4, 5))), a)
