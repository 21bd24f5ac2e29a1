"""A small multilayer perceptron whose nonlinearity is an activation tree.

Each hidden layer is ``linear -> batch norm -> activation``; the output layer
is linear followed by softmax cross-entropy. Training is mini-batch SGD with
Nesterov momentum in its lookahead form::

    v <- mu * v - lr * grad(theta + mu * v)
    theta <- theta + v

with a step-decay learning-rate schedule. Any non-finite loss, activation or
gradient ends training with ``status="diverged"`` and capped metrics.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import Node
from .numerics import DEFAULT_POLICY, SafetyPolicy, forward
from .errors import ConfigError
from .rng import Rng, make_rng

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    num_classes: int
    hidden_layers: tuple[int, ...] = (64, 64)
    batch_norm: bool = True
    weight_init: str = "fan_in"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if self.input_dim < 1 or self.num_classes < 1:
            raise ConfigError("input_dim and num_classes must be >= 1")
        if any(w < 1 for w in self.hidden_layers):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden_layers}")
        if self.weight_init != "fan_in":
            raise ConfigError(f"unknown weight_init {self.weight_init!r}")


def default_decay_epochs(epochs: int) -> tuple[int, ...]:
    """Decay points at 50%, 80% and 90% of training (25/40/45 for 50 epochs)."""
    marks = sorted({int(epochs * f) for f in (0.5, 0.8, 0.9)})
    return tuple(e for e in marks if 0 < e < epochs)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    base_lr: float = 0.1
    lr_decay_factor: float = 0.2
    lr_decay_epochs: tuple[int, ...] | None = None
    momentum: float = 0.9
    seed: int = 0
    divergence_loss_cap: float = 20.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not 0 < self.lr_decay_factor < 1:
            raise ConfigError("lr_decay_factor must lie in (0, 1)")
        if self.lr_decay_epochs is None:
            object.__setattr__(self, "lr_decay_epochs", default_decay_epochs(self.epochs))
        else:
            object.__setattr__(self, "lr_decay_epochs", tuple(int(e) for e in self.lr_decay_epochs))
        ds = self.lr_decay_epochs
        if any(b <= a for a, b in zip(ds, ds[1:])) or any(e >= self.epochs or e < 0 for e in ds):
            raise ConfigError(f"decay epochs must be increasing and < epochs, got {ds}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate used during (0-based) ``epoch``."""
        drops = sum(1 for e in self.lr_decay_epochs if epoch >= e)
        return self.base_lr * self.lr_decay_factor ** drops

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lr_decay_epochs"] = list(self.lr_decay_epochs)
        return d


@dataclass
class TrainingMetrics:
    final_val_loss: float
    final_val_acc: float
    per_epoch: list[tuple[float, float, float]] = field(default_factory=list)
    status: str = "completed"


@dataclass
class Network:
    config: NetworkConfig
    params: dict[str, np.ndarray]
    running_mean: list[np.ndarray]
    running_var: list[np.ndarray]

    @property
    def n_hidden(self) -> int:
        return len(self.config.hidden_layers)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> Network:
        return Network(self.config, {k: v.copy() for k, v in self.params.items()},
                       [m.copy() for m in self.running_mean], [v.copy() for v in self.running_var])


def init_network(cfg: NetworkConfig, rng: Rng) -> Network:
    """Fan-in scaled normal weights, zero biases, unit BN scale, zero BN shift."""
    widths = [cfg.input_dim, *cfg.hidden_layers, cfg.num_classes]
    params: dict[str, np.ndarray] = {}
    for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        params[f"W{i}"] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
        if cfg.batch_norm and i < len(cfg.hidden_layers):
            params[f"gamma{i}"] = np.ones(fan_out)
            params[f"beta{i}"] = np.zeros(fan_out)
    return Network(cfg, params,
                   [np.zeros(w) for w in cfg.hidden_layers],
                   [np.ones(w) for w in cfg.hidden_layers])


class _Diverged(Exception):
    pass


def batch_norm_forward(z: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mu = z.mean(axis=0)
    var = z.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    zhat = (z - mu) * inv_std
    return gamma * zhat + beta, (zhat, inv_std, mu, var)


def batch_norm_backward(dy: np.ndarray, gamma: np.ndarray, cache):
    zhat, inv_std, _, _ = cache
    n = dy.shape[0]
    dgamma = (dy * zhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dzhat = dy * gamma
    dz = inv_std / n * (n * dzhat - dzhat.sum(axis=0) - zhat * (dzhat * zhat).sum(axis=0))
    return dz, dgamma, dbeta


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _forward(net: Network, params: dict[str, np.ndarray], activation: Node, X: np.ndarray,
             policy: SafetyPolicy, training: bool, check: bool):
    caches = []
    h = X
    with np.errstate(all="ignore"):
        for i in range(net.n_hidden):
            z = h @ params[f"W{i}"] + params[f"b{i}"]
            bn_cache = None
            if net.config.batch_norm:
                if training:
                    y, bn_cache = batch_norm_forward(z, params[f"gamma{i}"], params[f"beta{i}"])
                else:
                    inv_std = 1.0 / np.sqrt(net.running_var[i] + BN_EPS)
                    y = params[f"gamma{i}"] * (z - net.running_mean[i]) * inv_std + params[f"beta{i}"]
            else:
                y = z
            a, da, _ = forward(activation, y, policy, need_deriv=training)
            if check and not np.all(np.isfinite(a)):
                raise _Diverged(f"non-finite activation in layer {i}")
            caches.append((h, bn_cache, da))
            h = a
        logits = h @ params[f"W{net.n_hidden}"] + params[f"b{net.n_hidden}"]
    return logits, caches, h


def loss_and_grads(net: Network, params: dict[str, np.ndarray], activation: Node,
                   X: np.ndarray, y: np.ndarray, policy: SafetyPolicy = DEFAULT_POLICY,
                   check: bool = True):
    """Mean cross-entropy and its gradient, training-mode batch norm.

    Returns ``(loss, grads, batch_stats)`` where ``batch_stats`` holds each
    layer's (mean, var) for updating running statistics.
    """
    logits, caches, h = _forward(net, params, activation, X, policy, training=True, check=check)
    n = X.shape[0]
    L = net.n_hidden
    with np.errstate(all="ignore"):
        logp = _log_softmax(logits)
        loss = float(-logp[np.arange(n), y].mean())
        if check and not np.isfinite(loss):
            raise _Diverged("non-finite loss")
        dlogits = np.exp(logp)
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        grads: dict[str, np.ndarray] = {}
        grads[f"W{L}"] = h.T @ dlogits
        grads[f"b{L}"] = dlogits.sum(axis=0)
        dh = dlogits @ params[f"W{L}"].T
        stats = []
        for i in reversed(range(L)):
            h_prev, bn_cache, da = caches[i]
            dy = dh * da
            if bn_cache is not None:
                dz, grads[f"gamma{i}"], grads[f"beta{i}"] = batch_norm_backward(
                    dy, params[f"gamma{i}"], bn_cache)
                stats.append((bn_cache[2], bn_cache[3]))
            else:
                dz = dy
            grads[f"W{i}"] = h_prev.T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            if i:
                dh = dz @ params[f"W{i}"].T
    if check:
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise _Diverged(f"non-finite gradient for {k}")
    return loss, grads, stats[::-1]


def nesterov_step(theta: dict[str, np.ndarray], velocity: dict[str, np.ndarray],
                  grad_fn, lr: float, momentum: float) -> None:
    """One lookahead Nesterov update, in place. ``grad_fn`` maps params to grads."""
    lookahead = {k: theta[k] + momentum * velocity[k] for k in theta}
    grads = grad_fn(lookahead)
    for k in theta:
        velocity[k] *= momentum
        velocity[k] -= lr * grads[k]
        theta[k] += velocity[k]


def evaluate(net: Network, activation: Node, X: np.ndarray, y: np.ndarray,
             policy: SafetyPolicy = DEFAULT_POLICY) -> tuple[float, float]:
    """Mean cross-entropy and top-1 accuracy, inference-mode batch norm."""
    logits, _, _ = _forward(net, net.params, activation, X, policy, training=False, check=False)
    with np.errstate(all="ignore"):
        logp = _log_softmax(logits)
        loss = float(-logp[np.arange(len(y)), y].mean())
    if not np.all(np.isfinite(logits)):
        return float("nan"), 0.0
    acc = float((logits.argmax(axis=1) == y).mean())
    return loss, acc


def train(net: Network, activation: Node, data, tc: TrainConfig,
          policy: SafetyPolicy = DEFAULT_POLICY) -> TrainingMetrics:
    """Train ``net`` in place on ``data``'s train split; report on its val split."""
    Xtr, ytr = data.split("train")
    Xva, yva = data.split("val")
    rng = make_rng(tc.seed)
    theta = net.params
    velocity = {k: np.zeros_like(v) for k, v in theta.items()}
    per_epoch: list[tuple[float, float, float]] = []
    n = len(ytr)

    def diverged() -> TrainingMetrics:
        return TrainingMetrics(tc.divergence_loss_cap, 0.0, per_epoch, "diverged")

    for epoch in range(tc.epochs):
        lr = tc.lr_at(epoch)
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            Xb, yb = Xtr[idx], ytr[idx]
            result = {}

            def grad_fn(params):
                loss, grads, stats = loss_and_grads(net, params, activation, Xb, yb, policy)
                result["loss"], result["stats"] = loss, stats
                return grads

            try:
                nesterov_step(theta, velocity, grad_fn, lr, tc.momentum)
            except _Diverged:
                return diverged()
            if not all(np.all(np.isfinite(v)) for v in theta.values()):
                return diverged()
            for i, (mu, var) in enumerate(result["stats"]):
                net.running_mean[i] = (1 - BN_MOMENTUM) * net.running_mean[i] + BN_MOMENTUM * mu
                net.running_var[i] = (1 - BN_MOMENTUM) * net.running_var[i] + BN_MOMENTUM * var
            batch_losses.append(result["loss"])
        val_loss, val_acc = evaluate(net, activation, Xva, yva, policy)
        if not np.isfinite(val_loss):
            return diverged()
        per_epoch.append((float(np.mean(batch_losses)), val_loss, val_acc))

    final = per_epoch[-1]
    return TrainingMetrics(final[1], final[2], per_epoch, "completed")
