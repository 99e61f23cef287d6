"""Graph-convolution link classifier with hand-derived gradients.

Architecture: batch normalisation over node features, four graph
convolutions ``act([H, G H] W)`` (ReLU on the first three, identity on the
last), then a per-node linear classifier into two logits. ``G`` is the
symmetric normalised propagation matrix of the graph with self-loops.
Minibatches of local graphs are stacked into one block-diagonal ``G``.
"""
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
DEFAULT_HIDDEN = (256, 128, 64, 32)


class ConfigurationError(ValueError):
    pass


class TrainingAborted(FloatingPointError):
    pass


class StaleCacheError(RuntimeError):
    pass


class ModelLoadError(ValueError):
    pass


# ---------------------------------------------------------------------------
# propagation operator


@dataclass
class LaplacianOperator:
    """``D^-1/2 (A + I) D^-1/2``; dense or scipy-sparse."""

    g_matrix: object

    @property
    def n(self) -> int:
        return self.g_matrix.shape[0]

    def dot(self, h: np.ndarray) -> np.ndarray:
        return self.g_matrix @ h

    def dense(self) -> np.ndarray:
        g = self.g_matrix
        return g.toarray() if sp.issparse(g) else np.asarray(g)


def normalized_laplacian(a) -> LaplacianOperator:
    a = np.asarray(a, dtype=float)
    a_tilde = a + np.eye(len(a))
    d_inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return LaplacianOperator(d_inv_sqrt[:, None] * a_tilde * d_inv_sqrt[None, :])


def block_laplacian(ops: Sequence[LaplacianOperator]) -> LaplacianOperator:
    return LaplacianOperator(sp.block_diag([op.dense() for op in ops], format="csr"))


# ---------------------------------------------------------------------------
# model


@dataclass
class GcnModel:
    in_dim: int
    hidden: Tuple[int, ...]
    layers: List[np.ndarray]
    cls_w: np.ndarray
    cls_b: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    c_eps: int = 16
    provider_dim: int = 0
    version: int = field(default=0, compare=False)

    @classmethod
    def init(cls, in_dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN, seed: int = 0,
             n_classes: int = 2, c_eps: int = 16, provider_dim: int = 0) -> "GcnModel":
        """Glorot-uniform weights drawn from a seeded generator."""
        rng = np.random.default_rng(seed)
        hidden = tuple(int(h) for h in hidden)
        widths = (in_dim,) + hidden
        layers = []
        for d_in, d_out in zip(widths[:-1], widths[1:]):
            lim = math.sqrt(6.0 / (2 * d_in + d_out))
            layers.append(rng.uniform(-lim, lim, size=(2 * d_in, d_out)))
        lim = math.sqrt(6.0 / (widths[-1] + n_classes))
        return cls(
            in_dim=in_dim, hidden=hidden, layers=layers,
            cls_w=rng.uniform(-lim, lim, size=(widths[-1], n_classes)),
            cls_b=np.zeros(n_classes),
            bn_gamma=np.ones(in_dim), bn_beta=np.zeros(in_dim),
            running_mean=np.zeros(in_dim), running_var=np.ones(in_dim),
            c_eps=c_eps, provider_dim=provider_dim,
        )

    def params(self) -> Dict[str, np.ndarray]:
        """Trainable arrays by name; the arrays are the live model storage."""
        p = {"bn.gamma": self.bn_gamma, "bn.beta": self.bn_beta}
        for i, w in enumerate(self.layers):
            p[f"conv{i}.w"] = w
        p["cls.w"] = self.cls_w
        p["cls.b"] = self.cls_b
        return p

    def copy(self) -> "GcnModel":
        return GcnModel(self.in_dim, self.hidden, [w.copy() for w in self.layers],
                        self.cls_w.copy(), self.cls_b.copy(), self.bn_gamma.copy(),
                        self.bn_beta.copy(), self.running_mean.copy(), self.running_var.copy(),
                        self.bn_momentum, self.bn_eps, self.c_eps, self.provider_dim)

    def check(self) -> None:
        widths = (self.in_dim,) + tuple(self.hidden)
        if len(self.layers) != len(self.hidden):
            raise ConfigurationError("layer count does not match hidden widths")
        for i, w in enumerate(self.layers):
            if w.shape != (2 * widths[i], widths[i + 1]):
                raise ConfigurationError(
                    f"conv{i} weight has shape {w.shape}, expected {(2 * widths[i], widths[i + 1])}")
        if self.cls_w.shape[0] != widths[-1]:
            raise ConfigurationError("classifier width does not match last hidden width")
        for name, arr in self.params().items():
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"parameter {name} is not finite")


# ---------------------------------------------------------------------------
# forward / loss / backward


@dataclass
class ForwardCache:
    version: int
    x_hat: np.ndarray
    bn_std: np.ndarray
    concat: List[np.ndarray]
    pre: List[np.ndarray]
    h_last: np.ndarray
    lap: LaplacianOperator
    logits: np.ndarray


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def gcn_forward(model: GcnModel, x: np.ndarray, lap: LaplacianOperator,
                training: bool = False, update_stats: bool = True) -> Tuple[np.ndarray, ForwardCache]:
    """Per-node class probabilities and the activations needed by ``gcn_backward``.

    In training mode the normalisation uses batch statistics (and updates the
    running estimates unless ``update_stats`` is off); otherwise it uses the
    running estimates.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ConfigurationError(f"feature matrix has shape {x.shape}, model expects "
                                 f"(N, {model.in_dim})")
    if lap.n != x.shape[0]:
        raise ConfigurationError(f"propagation matrix is {lap.n}x{lap.n} for {x.shape[0]} nodes")
    if training:
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        if update_stats:
            m = model.bn_momentum
            model.running_mean[...] = m * model.running_mean + (1 - m) * mean
            model.running_var[...] = m * model.running_var + (1 - m) * var
    else:
        mean, var = model.running_mean, model.running_var
    std = np.sqrt(var + model.bn_eps)
    x_hat = (x - mean) / std
    h = model.bn_gamma * x_hat + model.bn_beta
    concat, pre = [], []
    last = len(model.layers) - 1
    for i, w in enumerate(model.layers):
        c = np.concatenate([h, lap.dot(h)], axis=1)
        s = c @ w
        concat.append(c)
        pre.append(s)
        h = np.maximum(s, 0.0) if i < last else s
    logits = h @ model.cls_w + model.cls_b
    cache = ForwardCache(model.version, x_hat, std, concat, pre, h, lap, logits)
    return softmax(logits), cache


def masked_ce_loss(probs: np.ndarray, labels, one_hop) -> Tuple[float, np.ndarray, bool]:
    """Mean cross-entropy over the 1-hop rows.

    Returns ``(loss, dlogits, empty)``; ``dlogits`` is the gradient with
    respect to the pre-softmax logits and is zero on every other row.
    """
    rows = np.asarray(one_hop, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    grad = np.zeros_like(probs)
    if rows.size == 0:
        return 0.0, grad, True
    if labels.shape != rows.shape:
        raise ValueError("labels must align with the 1-hop rows")
    p = probs[rows, labels]
    loss = float(-np.mean(np.log(np.maximum(p, 1e-300))))
    g = probs[rows].copy()
    g[np.arange(len(rows)), labels] -= 1.0
    grad[rows] = g / len(rows)
    return loss, grad, False


def gcn_backward(model: GcnModel, cache: ForwardCache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
    """Parameter gradients given the loss gradient at the logits."""
    if cache.version != model.version:
        raise StaleCacheError("forward cache was produced by a different parameter version")
    grads = {"cls.w": cache.h_last.T @ dlogits, "cls.b": dlogits.sum(axis=0)}
    dh = dlogits @ model.cls_w.T
    last = len(model.layers) - 1
    for i in range(last, -1, -1):
        w = model.layers[i]
        ds = dh if i == last else dh * (cache.pre[i] > 0)
        grads[f"conv{i}.w"] = cache.concat[i].T @ ds
        dc = ds @ w.T
        d = dc.shape[1] // 2
        # G is symmetric, so its adjoint is itself
        dh = dc[:, :d] + cache.lap.dot(dc[:, d:])
    grads["bn.gamma"] = np.sum(dh * cache.x_hat, axis=0)
    grads["bn.beta"] = dh.sum(axis=0)
    return grads


# ---------------------------------------------------------------------------
# optimisation


@dataclass
class OptimizerConfig:
    kind: str = "sgd"
    lr: float = 0.01
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


class Optimizer:
    """SGD with momentum or Adam over a dict of parameter arrays (updated in place)."""

    def __init__(self, cfg: Optional[OptimizerConfig] = None):
        self.cfg = cfg or OptimizerConfig()
        if self.cfg.kind not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.cfg.kind!r}")
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if name not in params or params[name].shape != g.shape:
                raise ConfigurationError(f"gradient {name} does not match any parameter")
            if not np.all(np.isfinite(g)):
                raise TrainingAborted(f"non-finite gradient in {name} at step {self.t + 1}")
        c = self.cfg
        self.t += 1
        for name, g in grads.items():
            p = params[name]
            if c.weight_decay:
                g = g + c.weight_decay * p
            if c.kind == "sgd":
                if c.momentum:
                    buf = self.m.get(name)
                    buf = g.copy() if buf is None else c.momentum * buf + g
                    self.m[name] = buf
                    g = buf
                p -= c.lr * g
            else:
                m = self.m.get(name, np.zeros_like(p))
                v = self.v.get(name, np.zeros_like(p))
                m = c.beta1 * m + (1 - c.beta1) * g
                v = c.beta2 * v + (1 - c.beta2) * g * g
                self.m[name], self.v[name] = m, v
                m_hat = m / (1 - c.beta1 ** self.t)
                v_hat = v / (1 - c.beta2 ** self.t)
                p -= c.lr * m_hat / (np.sqrt(v_hat) + c.eps)


@dataclass
class GraphSample:
    """One local graph ready for the network."""

    x: np.ndarray
    lap: LaplacianOperator
    one_hop: np.ndarray
    labels: Optional[np.ndarray] = None


@dataclass
class Batch:
    x: np.ndarray
    lap: LaplacianOperator
    rows: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray


def make_batch(samples: Sequence[GraphSample]) -> Batch:
    sizes = [s.x.shape[0] for s in samples]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    rows = np.concatenate([s.one_hop + o for s, o in zip(samples, offsets[:-1])]).astype(np.int64)
    labels = np.concatenate([
        s.labels if s.labels is not None else np.zeros(len(s.one_hop), dtype=np.int64)
        for s in samples]).astype(np.int64)
    x = np.concatenate([s.x for s in samples], axis=0)
    return Batch(x, block_laplacian([s.lap for s in samples]), rows, labels, offsets)


@dataclass
class TrainState:
    model: GcnModel
    optimizer: Optimizer
    seed: int
    epoch: int = 0
    history: List[dict] = field(default_factory=list)


def train_step(state: TrainState, batch: Batch) -> Tuple[float, int]:
    model = state.model
    probs, cache = gcn_forward(model, batch.x, batch.lap, training=True)
    loss, dlogits, _ = masked_ce_loss(probs, batch.labels, batch.rows)
    grads = gcn_backward(model, cache, dlogits)
    state.optimizer.step(model.params(), grads)
    model.version += 1
    correct = int(np.sum(np.argmax(probs[batch.rows], axis=1) == batch.labels))
    return loss, correct


def train(model: GcnModel, dataset: Sequence[GraphSample], epochs: int, seed: int = 0,
          batch_size: int = 32, optimizer: Optional[OptimizerConfig] = None,
          state: Optional[TrainState] = None, eval_set: Optional[Sequence[GraphSample]] = None,
          log_every: int = 1) -> TrainState:
    """Minibatch training with a seeded per-epoch shuffle."""
    if not dataset:
        raise ValueError("training needs at least one labelled graph")
    labels = np.concatenate([s.labels for s in dataset])
    if labels.min() == labels.max():
        logger.warning("all training labels are %d; training is degenerate", labels[0])
    state = state or TrainState(model, Optimizer(optimizer), seed)
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        total_loss, total_correct, total_rows = 0.0, 0, 0
        for start in range(0, len(order), batch_size):
            batch = make_batch([dataset[i] for i in order[start:start + batch_size]])
            loss, correct = train_step(state, batch)
            total_loss += loss * len(batch.rows)
            total_correct += correct
            total_rows += len(batch.rows)
        state.epoch += 1
        rec = {"epoch": state.epoch, "loss": total_loss / max(total_rows, 1),
               "accuracy": total_correct / max(total_rows, 1)}
        if eval_set:
            rec["eval_accuracy"] = evaluate_accuracy(model, eval_set)
        state.history.append(rec)
        if log_every and state.epoch % log_every == 0:
            logger.info("epoch %d loss %.4f acc %.4f%s", state.epoch, rec["loss"], rec["accuracy"],
                        f" eval {rec['eval_accuracy']:.4f}" if eval_set else "")
    return state


def predict_link_probs(model: GcnModel, samples: Sequence[GraphSample],
                       batch_size: int = 256) -> List[np.ndarray]:
    """Positive-class probability of each sample's 1-hop nodes (inference mode)."""
    out: List[np.ndarray] = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = make_batch(chunk)
        probs, _ = gcn_forward(model, batch.x, batch.lap, training=False)
        for s, off in zip(chunk, batch.offsets[:-1]):
            out.append(probs[s.one_hop + off, 1].copy())
    return out


def evaluate_accuracy(model: GcnModel, samples: Sequence[GraphSample]) -> float:
    preds = predict_link_probs(model, samples)
    correct = sum(int(np.sum((p >= 0.5).astype(np.int64) == s.labels)) for p, s in zip(preds, samples))
    total = sum(len(s.labels) for s in samples)
    return correct / max(total, 1)


# ---------------------------------------------------------------------------
# checkpoints


def model_to_json(model: GcnModel) -> dict:
    return {
        "format_version": CHECKPOINT_VERSION,
        "dims": [model.in_dim, *model.hidden, int(model.cls_w.shape[1])],
        "c_eps": model.c_eps,
        "provider_dim": model.provider_dim,
        "bn": {"gamma": model.bn_gamma.tolist(), "beta": model.bn_beta.tolist(),
               "running_mean": model.running_mean.tolist(),
               "running_var": model.running_var.tolist(),
               "momentum": model.bn_momentum, "eps": model.bn_eps},
        "layers": [w.tolist() for w in model.layers],
        "classifier": {"w": model.cls_w.tolist(), "b": model.cls_b.tolist()},
    }


def model_from_json(d: dict) -> GcnModel:
    try:
        version = d["format_version"]
        if version != CHECKPOINT_VERSION:
            raise ModelLoadError(f"checkpoint format {version} is not supported "
                                 f"(expected {CHECKPOINT_VERSION})")
        dims = [int(v) for v in d["dims"]]
        bn = d["bn"]
        model = GcnModel(
            in_dim=dims[0], hidden=tuple(dims[1:-1]),
            layers=[np.asarray(w, dtype=float) for w in d["layers"]],
            cls_w=np.asarray(d["classifier"]["w"], dtype=float),
            cls_b=np.asarray(d["classifier"]["b"], dtype=float),
            bn_gamma=np.asarray(bn["gamma"], dtype=float),
            bn_beta=np.asarray(bn["beta"], dtype=float),
            running_mean=np.asarray(bn["running_mean"], dtype=float),
            running_var=np.asarray(bn["running_var"], dtype=float),
            bn_momentum=float(bn["momentum"]), bn_eps=float(bn["eps"]),
            c_eps=int(d["c_eps"]), provider_dim=int(d["provider_dim"]),
        )
    except ModelLoadError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelLoadError(f"malformed checkpoint: {exc}") from exc
    try:
        model.check()
    except ConfigurationError as exc:
        raise ModelLoadError(f"inconsistent checkpoint: {exc}") from exc
    return model


def save_model(model: GcnModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model)))


def load_model(path) -> GcnModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelLoadError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"checkpoint {path} is corrupt or truncated: {exc}") from exc
    return model_from_json(d)
