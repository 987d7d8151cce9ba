import numpy as np
import pytest
from hypothesis import given, strategies as st

from guided_stereo.types import (
    INVALID,
    Calibration,
    CostVolume,
    DisparityMap,
    GrayImage,
    GuideParams,
    Polarity,
    SparseHints,
    StereoError,
    density,
)


def test_density_empty_and_full():
    zeros = np.zeros((4, 5))
    assert density(SparseHints(zeros, np.zeros((4, 5), bool))) == 0.0
    assert density(SparseHints(zeros, np.ones((4, 5), bool))) == 1.0


def test_density_five_of_hundred():
    v = np.zeros((10, 10), bool)
    v.flat[[3, 17, 42, 66, 99]] = True
    assert density(SparseHints(np.zeros((10, 10)), v)) == 5 / 100


@given(st.integers(0, 100), st.integers(0, 2**32 - 1))
def test_density_permutation_invariant(n_set, seed):
    rng = np.random.default_rng(seed)
    v = np.zeros(100, bool)
    v[:n_set] = True
    a = SparseHints(np.zeros((10, 10)), v.reshape(10, 10))
    b = SparseHints(np.zeros((10, 10)), rng.permutation(v).reshape(10, 10))
    assert density(a) == density(b) == n_set / 100


@pytest.mark.parametrize("bad", [
    np.zeros((0, 3)),
    np.zeros(5),
    np.array([[1.5, 2.0]]),
    np.array([[-1, 2]]),
    np.array([[256, 0]]),
])
def test_gray_image_rejects(bad):
    with pytest.raises(StereoError):
        GrayImage(bad)


def test_gray_image_is_read_only():
    img = GrayImage(np.zeros((3, 3), np.uint8))
    with pytest.raises(ValueError):
        img.data[0, 0] = 5


def test_cost_volume_rejects_negative_and_nan():
    with pytest.raises(StereoError):
        CostVolume(-np.ones((2, 2, 2)))
    bad = np.ones((2, 2, 2))
    bad[0, 0, 0] = np.nan
    with pytest.raises(StereoError):
        CostVolume(bad)
    with pytest.raises(StereoError):
        CostVolume(np.ones((2, 2)))


def test_cost_volume_is_float32_copy():
    src = np.ones((2, 3, 4))
    vol = CostVolume(src, Polarity.SIMILARITY)
    src[0, 0, 0] = 7
    assert vol.costs.dtype == np.float32
    assert vol.costs[0, 0, 0] == 1
    assert (vol.height, vol.width, vol.max_disparity) == (2, 3, 4)


def test_sparse_hints_validation():
    with pytest.raises(StereoError):
        SparseHints(np.zeros((2, 2)), np.zeros((2, 3), bool))
    with pytest.raises(StereoError):
        SparseHints(np.zeros((2, 2)), np.full((2, 2), 2))
    with pytest.raises(StereoError):
        SparseHints(np.full((2, 2), np.inf), np.ones((2, 2), bool))
    with pytest.raises(StereoError):
        SparseHints(np.full((2, 2), -1.0), np.ones((2, 2), bool))
    # non-finite g is fine where the mask is off
    h = SparseHints(np.array([[np.nan, 3.0]]), np.array([[0, 1]]))
    assert h.g[0, 0] == 0 and h.g[0, 1] == 3.0 and h.count == 1


def test_disparity_map_sentinel():
    m = DisparityMap(np.array([[0.0, 2.5, -3.0]]))
    assert m.d[0, 2] == INVALID
    assert list(m.valid[0]) == [True, True, False]
    with pytest.raises(StereoError):
        DisparityMap(np.array([[np.nan]]))


@pytest.mark.parametrize("f,b", [(0, 1), (1, 0), (-1, 1), (np.inf, 1)])
def test_calibration_rejects(f, b):
    with pytest.raises(StereoError):
        Calibration(f, b)


def test_guide_params_rules():
    assert GuideParams() == GuideParams(10.0, 1.0)
    GuideParams(1.0, 0.1)
    with pytest.raises(StereoError):
        GuideParams(0.5, 1.0)
    with pytest.raises(StereoError):
        GuideParams(10.0, 0.0)
