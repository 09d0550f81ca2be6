"""Finite-width fully connected networks in tangent-kernel parameterization.

Propagation keeps the 1/sqrt(n_ell) prefactor explicit:
h^(ell+1) = W^(ell) sigma(h^(ell)) / sqrt(n_ell) + xi * b^(ell),
so stored weights stay order one at any width. Two init schemes are
available: unit Gaussian (the theory convention) and a He-like
N(0, sqrt(2/N_param)) scale used in training experiments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, bce_cost, mse_cost

ACTIVATIONS = ("relu", "sigmoid", "identity")
INIT_SCHEMES = ("unit_gaussian", "he_scaled")
LOSSES = ("mse", "bce")


class DivergenceError(RuntimeError):
    """Raised when the training cost becomes non-finite."""

    def __init__(self, step: int):
        super().__init__(f"training diverged at step {step}: non-finite cost")
        self.step = step


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_deriv(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "sigmoid":
        s = 1.0 / (1.0 + np.exp(-z))
        return s * (1.0 - s)
    return np.ones_like(z)


@dataclass(frozen=True)
class NetworkConfig:
    widths: tuple[int, ...]  # (n_0, ..., n_L) with n_L = 1
    xi: float = 0.0
    activations: tuple[str, ...] | None = None  # one per hidden layer
    init_scheme: str = "unit_gaussian"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least an input and an output layer")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1")
        if any(w < 1 for w in self.widths):
            raise ValueError("widths must be >= 1")
        acts = self.activations
        if acts is None:
            acts = ("relu",) * (len(self.widths) - 2)
            object.__setattr__(self, "activations", acts)
        if len(acts) != len(self.widths) - 2:
            raise ValueError("need one activation per hidden layer")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise ValueError(f"unknown init scheme {self.init_scheme!r}")

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def n_params(self) -> int:
        return sum(
            self.widths[l + 1] * self.widths[l] + self.widths[l + 1]
            for l in range(self.depth)
        )


@dataclass
class NetworkState:
    config: NetworkConfig
    weights: list[np.ndarray]  # W^(l): (n_{l+1}, n_l)
    biases: list[np.ndarray]  # b^(l): (n_{l+1},)
    seed: int

    def copy(self) -> "NetworkState":
        return NetworkState(
            config=self.config,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            seed=self.seed,
        )

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def to_csv(self, path) -> None:
        cfg = self.config
        with open(path, "w", newline="") as fh:
            fh.write(
                "# widths=%s xi=%r activations=%s init=%s seed=%d\n"
                % (
                    ",".join(map(str, cfg.widths)),
                    cfg.xi,
                    ",".join(cfg.activations),
                    cfg.init_scheme,
                    self.seed,
                )
            )
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(self.flat()):
                writer.writerow([i, repr(float(v))])


def init(config: NetworkConfig, rng: np.random.Generator | int) -> NetworkState:
    """Sample a fresh parameter set; deterministic under an integer seed."""
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    else:
        seed = -1
    scale = 1.0
    if config.init_scheme == "he_scaled":
        scale = np.sqrt(2.0 / config.n_params)
    weights, biases = [], []
    for l in range(config.depth):
        weights.append(scale * rng.standard_normal((config.widths[l + 1], config.widths[l])))
        biases.append(scale * rng.standard_normal(config.widths[l + 1]))
    return NetworkState(config=config, weights=weights, biases=biases, seed=seed)


def _forward_batch(state: NetworkState, xs: np.ndarray):
    """Pre-activations and activations per layer for a batch of inputs.

    Returns (pre, post) lists; post[0] is the input batch itself.
    """
    cfg = state.config
    a = np.asarray(xs, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != cfg.widths[0]:
        raise ValueError(
            f"input dimension {a.shape[1]} does not match n_0={cfg.widths[0]}"
        )
    pre, post = [], [a]
    for l in range(cfg.depth):
        h = post[-1] @ state.weights[l].T / np.sqrt(cfg.widths[l]) + cfg.xi * state.biases[l]
        pre.append(h)
        if l < cfg.depth - 1:
            a = _act(cfg.activations[l], h)
        else:
            a = h  # linear readout; any output nonlinearity lives in the loss
        post.append(a)
    return pre, post


def forward(state: NetworkState, x: np.ndarray) -> float:
    """Scalar network output for a single input vector."""
    _, post = _forward_batch(state, np.asarray(x, dtype=float)[None, :])
    return float(post[-1][0, 0])


def forward_batch(state: NetworkState, xs: np.ndarray) -> np.ndarray:
    """Outputs for a batch of inputs, shape (N,)."""
    _, post = _forward_batch(state, xs)
    return post[-1][:, 0]


def _backprop(state: NetworkState, xs: np.ndarray):
    """Per-sample parameter gradients of the raw output.

    Returns (grad_w, grad_b) lists with leading batch axes.
    """
    cfg = state.config
    pre, post = _forward_batch(state, xs)
    n_batch = post[0].shape[0]
    delta = np.ones((n_batch, 1))  # d f / d h^(L)
    grad_w = [None] * cfg.depth
    grad_b = [None] * cfg.depth
    for l in range(cfg.depth - 1, -1, -1):
        grad_w[l] = np.einsum("bi,bj->bij", delta, post[l]) / np.sqrt(cfg.widths[l])
        grad_b[l] = cfg.xi * delta
        if l > 0:
            delta = (delta @ state.weights[l]) / np.sqrt(cfg.widths[l])
            delta = delta * _act_deriv(cfg.activations[l - 1], pre[l - 1])
    return grad_w, grad_b


def gradient(state: NetworkState, x: np.ndarray) -> np.ndarray:
    """Flat gradient d f(x) / d theta, ordered like NetworkState.flat()."""
    gw, gb = _backprop(state, np.asarray(x, dtype=float)[None, :])
    parts = []
    for w, b in zip(gw, gb):
        parts.append(w[0].ravel())
        parts.append(b[0].ravel())
    return np.concatenate(parts)


def gradient_matrix(state: NetworkState, xs: np.ndarray) -> np.ndarray:
    """Gradients for a dataset, shape (N_D, N_param)."""
    gw, gb = _backprop(state, xs)
    n = np.asarray(xs).shape[0] if np.asarray(xs).ndim > 1 else 1
    parts = []
    for w, b in zip(gw, gb):
        parts.append(w.reshape(n, -1))
        parts.append(b.reshape(n, -1))
    return np.concatenate(parts, axis=1)


@dataclass
class Optimizer:
    kind: str  # "sgd" or "adam"
    eta: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    _m: list | None = field(default=None, repr=False)
    _v: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.eta < 0:
            raise ValueError("learning rate must be non-negative")

    def update(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Apply one step in place on the given parameter arrays."""
        self.step_count += 1
        if self.kind == "sgd":
            for p, g in zip(params, grads):
                p -= self.eta * g
            return
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        t = self.step_count
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**t)
            v_hat = v / (1 - self.beta2**t)
            p -= self.eta * m_hat / (np.sqrt(v_hat) + self.eps)


def _loss_and_residual(loss: str, outputs: np.ndarray, y: np.ndarray):
    """Cost value and d cost / d f per sample."""
    if loss == "mse":
        return float(mse_cost(outputs, y)), outputs - y
    sig = 1.0 / (1.0 + np.exp(-outputs))
    return float(bce_cost(outputs, y)), sig - y


def train(
    state: NetworkState,
    xs: np.ndarray,
    y: np.ndarray,
    loss: str,
    optimizer: Optimizer,
    steps: int,
    batch: int | None = None,
    rng: np.random.Generator | None = None,
    record_every: int = 1,
) -> Trajectory:
    """Gradient-descent training; mutates `state` and returns the log.

    `batch=None` means full batch. Recorded outputs and cost are always
    evaluated on the full dataset. Raises DivergenceError when the cost
    stops being finite, naming the offending step.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    xs = np.asarray(xs, dtype=float)
    y = np.asarray(y, dtype=float)
    if xs.shape[0] == 0:
        raise ValueError("dataset must be non-empty")
    if loss == "bce" and not np.all((y == 0) | (y == 1)):
        raise ValueError("binary cross entropy needs labels in {0, 1}")
    if batch is not None and rng is None:
        rng = np.random.default_rng(0)

    params = state.weights + state.biases

    def record():
        # overflow is expected right before a divergence is reported
        with np.errstate(over="ignore", invalid="ignore"):
            outputs = forward_batch(state, xs)
            cost, _ = _loss_and_residual(loss, outputs, y)
        return outputs, cost

    outputs, cost = record()
    times, outs, costs = [0.0], [outputs], [cost]
    for step in range(1, steps + 1):
        if batch is None:
            bx, by = xs, y
        else:
            idx = rng.choice(xs.shape[0], size=min(batch, xs.shape[0]), replace=False)
            bx, by = xs[idx], y[idx]
        with np.errstate(over="ignore", invalid="ignore"):
            batch_out = forward_batch(state, bx)
            _, resid = _loss_and_residual(loss, batch_out, by)
            gw, gb = _backprop(state, bx)
            grads = [np.einsum("b,b...->...", resid, g) for g in gw]
            grads += [np.einsum("b,b...->...", resid, g) for g in gb]
            optimizer.update(params, grads)
        if step % record_every == 0 or step == steps:
            outputs, cost = record()
            if not np.isfinite(cost):
                raise DivergenceError(step)
            times.append(float(step))
            outs.append(outputs)
            costs.append(cost)
    return Trajectory(
        times=np.array(times), outputs=np.array(outs), cost=np.array(costs)
    )


def training_log_csv(trajectory: Trajectory, path, test_metric=None) -> None:
    """Write a (step, cost[, test]) log; `test_metric` maps time -> value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["step", "cost"] + (["test"] if test_metric else [])
        writer.writerow(header)
        for t, c in zip(trajectory.times, trajectory.cost):
            row = [repr(float(t)), repr(float(c))]
            if test_metric:
                row.append(repr(float(test_metric(t))))
            writer.writerow(row)
