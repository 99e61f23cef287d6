"""Central finite-difference verification of the analytic GCN gradients."""
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from textlink.gcn import (
    GcnModel,
    gcn_backward,
    gcn_forward,
    masked_ce_loss,
    normalized_laplacian,
)


class KinkCrossed(ArithmeticError):
    """A finite-difference stencil straddles a ReLU switching point."""


@dataclass
class GradCheckResult:
    graph: int
    n_nodes: int
    training: bool
    errors: Dict[str, float]
    redrawn: int = 0

    @property
    def worst(self) -> float:
        return max(self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """Norm-wise relative difference ``|a - n| / max(|a|, |n|, floor)``."""
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), floor)
    return diff / scale


def random_graph(rng, n_nodes: int, in_dim: int):
    a = np.triu((rng.random((n_nodes, n_nodes)) < 0.4).astype(float), 1)
    a = a + a.T
    x = rng.normal(size=(n_nodes, in_dim))
    x[0] = 0.0
    k = int(rng.integers(1, n_nodes))
    rows = np.arange(1, k + 1)
    labels = rng.integers(0, 2, size=k)
    return a, x, rows, labels


def _mask(cache) -> np.ndarray:
    return np.concatenate([(s > 0).ravel() for s in cache.pre[:-1]])


def numeric_gradients(model: GcnModel, x, lap, rows, labels, training: bool,
                      step: float = 1e-3) -> Dict[str, np.ndarray]:
    def loss_fn():
        probs, cache = gcn_forward(model, x, lap, training=training, update_stats=False)
        return masked_ce_loss(probs, labels, rows)[0], _mask(cache)

    base = loss_fn()[1]
    out = {}
    for name, p in model.params().items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up, m_up = loss_fn()
            flat[i] = orig - step
            down, m_down = loss_fn()
            flat[i] = orig
            if not (np.array_equal(m_up, base) and np.array_equal(m_down, base)):
                raise KinkCrossed(f"{name}[{i}] stencil changes the ReLU pattern")
            gflat[i] = (up - down) / (2 * step)
        out[name] = g
    return out


def check_graph(model: GcnModel, x, a, rows, labels, training: bool, step: float = 1e-3):
    lap = normalized_laplacian(a)
    probs, cache = gcn_forward(model, x, lap, training=training, update_stats=False)
    _, dlogits, _ = masked_ce_loss(probs, labels, rows)
    analytic = gcn_backward(model, cache, dlogits)
    numeric = numeric_gradients(model, x, lap, rows, labels, training, step)
    return {k: relative_error(analytic[k], numeric[k]) for k in analytic}


def run_gradcheck(n_graphs: int = 20, seed: int = 0, max_nodes: int = 10,
                  in_dim: int = 8, hidden=(8, 8, 6, 4), step: float = 1e-3) -> List[GradCheckResult]:
    """Check every parameter tensor on ``n_graphs`` random graphs.

    Graphs alternate between batch-statistics and running-statistics
    normalisation; running statistics are randomised so both paths are
    non-trivial. A draw whose stencil crosses a ReLU switching point is not a
    differentiable test point and is replaced by a fresh draw; the number of
    replacements is recorded on the result.
    """
    rng = np.random.default_rng(seed)
    results = []
    k = 0
    redrawn = 0
    while len(results) < n_graphs:
        training = len(results) % 2 == 0
        try:
            errs, n = _one_draw(rng, in_dim, hidden, max_nodes, training, step)
        except KinkCrossed:
            redrawn += 1
            if redrawn > 50 * n_graphs:
                raise
            continue
        results.append(GradCheckResult(k, n, training, errs, redrawn))
        k += 1
        redrawn = 0
    return results


def _one_draw(rng, in_dim, hidden, max_nodes, training, step):
    model = GcnModel.init(in_dim, hidden, seed=int(rng.integers(1 << 31)))
    model.bn_gamma[:] = rng.uniform(0.5, 1.5, in_dim)
    model.bn_beta[:] = rng.normal(scale=0.1, size=in_dim)
    model.running_mean[:] = rng.normal(scale=0.5, size=in_dim)
    model.running_var[:] = rng.uniform(0.5, 2.0, in_dim)
    model.cls_b[:] = rng.normal(scale=0.1, size=model.cls_b.shape)
    n = int(rng.integers(3, max_nodes + 1))
    a, x, rows, labels = random_graph(rng, n, in_dim)
    return check_graph(model, x, a, rows, labels, training, step), n
