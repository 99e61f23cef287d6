"""The compiled kernels and the pure-Python fallback must agree exactly."""
import importlib
import itertools

import numpy as np
import pytest

from textlink import _pykernels, kernels

import oracles

try:
    from textlink import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def random_quads(rng, n):
    ctr = rng.uniform(0, 60, (n, 2))
    h = rng.uniform(2, 20, n)
    w = rng.uniform(2, 20, n)
    t = rng.uniform(-np.pi, np.pi, n)
    return np.stack([oracles.rect_corners(*ctr[i], h[i], w[i], t[i]) for i in range(n)])


def test_backend_selection_respects_env(monkeypatch):
    monkeypatch.setenv("TEXTLINK_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.convex_iou is _pykernels.convex_iou
    finally:
        monkeypatch.delenv("TEXTLINK_PURE_PYTHON")
        importlib.reload(kernels)


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_convex_iou_hand_cases(impl):
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert impl.convex_iou(sq, sq) == pytest.approx(1.0)
    assert impl.convex_iou(sq, sq + [0.5, 0]) == pytest.approx(1 / 3, abs=1e-12)
    assert impl.convex_iou(sq, sq + [3, 0]) == 0.0
    assert impl.convex_iou(sq, sq[::-1] + [0.5, 0.5]) == pytest.approx(0.25 / 1.75, abs=1e-12)
    flat = np.array([[0, 0], [1, 0], [1, 0], [0, 0]], float)
    assert impl.convex_iou(sq, flat) == 0.0


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_convex_iou_matches_oracle(impl):
    rng = np.random.default_rng(0)
    q = random_quads(rng, 60)
    for i, j in itertools.combinations(range(20), 2):
        assert impl.convex_iou(q[i], q[j]) == pytest.approx(oracles.convex_iou(q[i], q[j]),
                                                            abs=1e-9)


@needs_ext
def test_backends_agree_on_iou_nms_and_paths():
    rng = np.random.default_rng(1)
    for trial in range(30):
        q = random_quads(rng, 25)
        scores = rng.random(25)
        order = np.lexsort((np.arange(25), -scores))
        for i, j in itertools.combinations(range(8), 2):
            assert _ckernels.convex_iou(q[i], q[j]) == pytest.approx(
                _pykernels.convex_iou(q[i], q[j]), abs=1e-12)
        thr = float(rng.uniform(0.05, 0.7))
        assert list(_ckernels.greedy_nms(q, order, thr)) == list(_pykernels.greedy_nms(q, order, thr))
        n = int(rng.integers(1, 10))
        pts = rng.uniform(0, 100, (n, 2))
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        assert list(_ckernels.open_path_dp(d)) == list(_pykernels.open_path_dp(d))


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_open_path_dp_is_optimal(impl):
    rng = np.random.default_rng(2)
    for n in range(1, 8):
        pts = rng.uniform(0, 50, (n, 2))
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        order = list(impl.open_path_dp(d))
        assert sorted(order) == list(range(n))
        assert oracles.path_len(pts, order) == pytest.approx(oracles.brute_min_path_length(pts))


@pytest.mark.parametrize("impl", [_pykernels, pytest.param(_ckernels, marks=needs_ext)],
                         ids=["python", "cython"])
def test_greedy_nms_matches_brute_force(impl):
    rng = np.random.default_rng(3)
    for _ in range(10):
        q = random_quads(rng, 30)
        s = rng.random(30)
        keep = sorted(impl.greedy_nms(q, np.lexsort((np.arange(30), -s)), 0.3))
        assert keep == oracles.brute_nms(q, list(s), 0.3)
