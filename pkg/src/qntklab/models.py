"""End-to-end learning models.

Three contenders share one interface: the hybrid model (quantum encoder,
frozen random measurement, trainable classical head), a purely variational
quantum circuit trained with the parameter-shift rule, and a plain
fully connected network. Parameter counts follow the budget table:
n_0 for the hybrid head's effective kernel width, 3*n*L_q for the
variational circuit, (n+2)*n_0 for the classical baseline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .data import Dataset
from .dynamics import Trajectory, bce_cost, mse_cost
from .qsim import (
    EncoderSpec,
    Gate,
    PAULI_Z,
    RandomMeasurement,
    apply_circuit,
    encoded_state,
    expectation,
    feature_matrix,
)
from .qsim.state import LocalObservable

TASKS = ("regression", "classification")


def _check_task(task: str) -> None:
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")


# ---------------------------------------------------------------------------
# hybrid quantum-classical model


@dataclass
class QcnnModel:
    encoder: EncoderSpec
    measurement: RandomMeasurement
    head: nn.NetworkState
    task: str = "regression"
    threshold: float = 0.5

    def __post_init__(self):
        _check_task(self.task)
        if self.head.config.widths[0] != self.measurement.n_features:
            raise ValueError("head input width must equal the measurement count")

    @property
    def n_params(self) -> int:
        """Trainable-parameter budget: the n_0 weights of the linear head.

        Only the classical head trains; with the standard single-layer head
        and no bias term the budget equals the measurement count n_0.
        """
        return self.measurement.n_features

    def features(self, xs: np.ndarray, shots=None, rng=None) -> np.ndarray:
        return feature_matrix(np.atleast_2d(xs), self.encoder, self.measurement, shots, rng)


def build_qcnn(
    n: int,
    n0: int,
    m: int,
    ansatz: str,
    task: str = "regression",
    head_widths: tuple[int, ...] | None = None,
    xi: float = 0.0,
    init_scheme: str = "unit_gaussian",
    seed: int = 0,
    encoder_seed: int = 0,
) -> QcnnModel:
    """Assemble the hybrid model with a fresh random measurement and head."""
    rng = np.random.default_rng(seed)
    spec = EncoderSpec(ansatz=ansatz, n=n, random_seed=encoder_seed)
    if ansatz in ("A4", "A4c"):
        spec = EncoderSpec(ansatz=ansatz, n=n, depth_repeats=4, random_seed=encoder_seed)
    meas = RandomMeasurement.sample(n, m, n0, rng)
    widths = head_widths if head_widths is not None else (n0, 1)
    cfg = nn.NetworkConfig(widths=widths, xi=xi, init_scheme=init_scheme)
    head = nn.init(cfg, rng)
    return QcnnModel(encoder=spec, measurement=meas, head=head, task=task)


def qcnn_predict(model: QcnnModel, x: np.ndarray, shots=None, rng=None):
    """Raw output for regression; thresholded sigmoid label for classification."""
    feats = model.features(np.asarray(x, dtype=float)[None, :], shots, rng)[0]
    out = nn.forward(model.head, feats)
    if model.task == "regression":
        return out
    prob = 1.0 / (1.0 + np.exp(-out))
    return 1 if prob >= model.threshold else 0


def qcnn_train(
    model: QcnnModel,
    dataset: Dataset,
    optimizer: nn.Optimizer,
    steps: int,
    shots=None,
    rng=None,
    record_every: int = 1,
) -> Trajectory:
    """Train the classical head on cached quantum features.

    The quantum part is evaluated once per data point at the start; the
    encoder and measurement are never modified.
    """
    feats = model.features(dataset.inputs, shots, rng)
    loss = "mse" if model.task == "regression" else "bce"
    if steps == 0:
        outputs = nn.forward_batch(model.head, feats)
        cost_fn = mse_cost if loss == "mse" else bce_cost
        cost = float(cost_fn(outputs, dataset.labels))
        return Trajectory(
            times=np.array([0.0]), outputs=outputs[None, :], cost=np.array([cost])
        )
    return nn.train(
        model.head, feats, dataset.labels, loss, optimizer, steps,
        record_every=record_every,
    )


# ---------------------------------------------------------------------------
# variational quantum baseline


@dataclass
class QnnModel:
    encoder: EncoderSpec
    layers: int
    theta: np.ndarray  # (L_q, n, 3) Euler angles
    w: float = 1.0
    task: str = "regression"
    threshold: float = 0.5
    circuit_evals: int = field(default=0)

    def __post_init__(self):
        _check_task(self.task)
        if self.theta.shape != (self.layers, self.encoder.n, 3):
            raise ValueError("theta must have shape (L_q, n, 3)")

    @property
    def n_params(self) -> int:
        """3 angles per qubit per layer; w is the extra readout scale."""
        return 3 * self.encoder.n * self.layers

    def readout(self) -> LocalObservable:
        return LocalObservable(matrix=PAULI_Z.astype(complex), start=0, width=1)


def build_qnn(
    n: int,
    layers: int,
    ansatz: str = "QuantumData",
    task: str = "regression",
    seed: int = 0,
    encoder_seed: int = 0,
) -> QnnModel:
    rng = np.random.default_rng(seed)
    spec = EncoderSpec(ansatz=ansatz, n=n, random_seed=encoder_seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(layers, n, 3))
    return QnnModel(encoder=spec, layers=layers, theta=theta, task=task)


def _variational_gates(theta: np.ndarray, n: int) -> list[Gate]:
    """Per layer: U3 on every qubit, then a CNOT ring."""
    gates: list[Gate] = []
    for layer in theta:
        for q in range(n):
            gates.append(Gate("U3", (q,), tuple(float(a) for a in layer[q])))
        if n > 1:
            for q in range(n):
                gates.append(Gate("CNOT", (q, (q + 1) % n)))
    return gates


def qnn_raw_output(model: QnnModel, x: np.ndarray, theta: np.ndarray | None = None) -> float:
    """Tr[rho'(x) O'] with O' = sigma_z on the first qubit (no w factor)."""
    theta = model.theta if theta is None else theta
    state = encoded_state(model.encoder, x)
    apply_circuit(state, _variational_gates(theta, model.encoder.n))
    return expectation(state, model.readout())


def qnn_predict(model: QnnModel, x: np.ndarray):
    out = model.w * qnn_raw_output(model, x)
    if model.task == "regression":
        return out
    prob = 1.0 / (1.0 + np.exp(-out))
    return 1 if prob >= model.threshold else 0


def qnn_gradient(model: QnnModel, x: np.ndarray) -> tuple[np.ndarray, float]:
    """(d out / d theta, d out / d w) by the parameter-shift rule.

    Each angle generates a rotation, so the exact derivative is
    [f(theta + pi/2) - f(theta - pi/2)] / 2. The counter tracks only the
    2*N_p shifted evaluations, matching the gradient-cost accounting.
    """
    base = qnn_raw_output(model, x)
    grad = np.zeros_like(model.theta)
    shift = np.pi / 2.0
    for idx in np.ndindex(model.theta.shape):
        tp = model.theta.copy()
        tp[idx] += shift
        tm = model.theta.copy()
        tm[idx] -= shift
        grad[idx] = model.w * (qnn_raw_output(model, x, tp) - qnn_raw_output(model, x, tm)) / 2.0
        model.circuit_evals += 2
    return grad, base


def qnn_train(
    model: QnnModel,
    dataset: Dataset,
    optimizer: nn.Optimizer,
    steps: int,
    record_every: int = 1,
) -> Trajectory:
    """Full-batch training of the circuit angles (and w for regression)."""
    xs, y = dataset.inputs, dataset.labels
    loss = "mse" if model.task == "regression" else "bce"
    if loss == "bce" and not np.all((y == 0) | (y == 1)):
        raise ValueError("classification labels must lie in {0, 1}")

    def outputs_now():
        return np.array([model.w * qnn_raw_output(model, x) for x in xs])

    def cost_of(outputs):
        if loss == "mse":
            return float(mse_cost(outputs, y))
        return float(bce_cost(outputs, y))

    train_w = model.task == "regression"
    w_holder = np.array([model.w])
    params = [model.theta] + ([w_holder] if train_w else [])
    outputs = outputs_now()
    times, outs, costs = [0.0], [outputs], [cost_of(outputs)]
    for step in range(1, steps + 1):
        grad_theta = np.zeros_like(model.theta)
        grad_w = 0.0
        resid_outputs = outputs_now()
        if loss == "mse":
            resid = resid_outputs - y
        else:
            resid = 1.0 / (1.0 + np.exp(-resid_outputs)) - y
        for x, r in zip(xs, resid):
            g_theta, raw = qnn_gradient(model, x)
            grad_theta += r * g_theta
            grad_w += r * raw
        grads = [grad_theta] + ([np.array([grad_w])] if train_w else [])
        optimizer.update(params, grads)
        model.w = float(w_holder[0])
        if step % record_every == 0 or step == steps:
            outputs = outputs_now()
            cost = cost_of(outputs)
            if not np.isfinite(cost):
                raise nn.DivergenceError(step)
            times.append(float(step))
            outs.append(outputs)
            costs.append(cost)
    return Trajectory(times=np.array(times), outputs=np.array(outs), cost=np.array(costs))


# ---------------------------------------------------------------------------
# classical baseline


@dataclass
class CnnModel:
    net: nn.NetworkState
    task: str = "regression"
    threshold: float = 0.5

    def __post_init__(self):
        _check_task(self.task)
        if len(self.net.config.widths) != 3:
            raise ValueError("baseline network must be n -> n_0 -> 1")

    @property
    def n_params(self) -> int:
        n, n0, _ = self.net.config.widths
        return (n + 2) * n0


def build_cnn(
    n: int,
    n0: int,
    task: str = "regression",
    xi: float = 1.0,
    init_scheme: str = "unit_gaussian",
    seed: int = 0,
) -> CnnModel:
    cfg = nn.NetworkConfig(widths=(n, n0, 1), xi=xi, activations=("relu",), init_scheme=init_scheme)
    return CnnModel(net=nn.init(cfg, seed), task=task)


def cnn_predict(model: CnnModel, x: np.ndarray):
    out = nn.forward(model.net, np.asarray(x, dtype=float))
    if model.task == "regression":
        return out
    prob = 1.0 / (1.0 + np.exp(-out))
    return 1 if prob >= model.threshold else 0


def cnn_train(
    model: CnnModel,
    dataset: Dataset,
    optimizer: nn.Optimizer,
    steps: int,
    record_every: int = 1,
) -> Trajectory:
    loss = "mse" if model.task == "regression" else "bce"
    return nn.train(
        model.net, dataset.inputs, dataset.labels, loss, optimizer, steps,
        record_every=record_every,
    )


# ---------------------------------------------------------------------------
# comparison harness


def _metric(task, predict_fn, dataset) -> float:
    """RMSE for regression, accuracy for classification."""
    preds = np.array([predict_fn(x) for x in dataset.inputs])
    if task == "regression":
        return float(np.sqrt(np.mean((preds - dataset.labels) ** 2)))
    return float(np.mean(preds == dataset.labels))


@dataclass
class CompareReport:
    rows: list[dict]

    def to_csv(self, path) -> None:
        cols = ["model", "n", "seed", "train_metric", "test_metric", "n_params", "circuit_evals"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({c: row.get(c, "") for c in cols})

    def summary(self) -> dict:
        """Mean and standard deviation of the test metric per model."""
        out = {}
        models = sorted({r["model"] for r in self.rows})
        for m in models:
            vals = np.array([r["test_metric"] for r in self.rows if r["model"] == m])
            out[m] = (float(vals.mean()), float(vals.std()))
        return out


def compare_models(
    task: str,
    n: int,
    seeds,
    train: Dataset,
    test: Dataset,
    spec: EncoderSpec,
    n0: int = 100,
    m: int = 1,
    qnn_layers: int = 3,
    steps: int = 300,
    qnn_steps: int = 100,
    eta: float = 1e-3,
) -> CompareReport:
    """Per-seed train/test metrics for the three models on one dataset."""
    _check_task(task)
    rows = []
    for seed in seeds:
        rng = np.random.default_rng([seed, 0])  # substream 0: qcnn
        meas = RandomMeasurement.sample(n, m, n0, rng)
        head = nn.init(
            nn.NetworkConfig(widths=(n0, 1), xi=1.0, init_scheme="he_scaled"),
            int(rng.integers(2**31)),
        )
        qcnn = QcnnModel(encoder=spec, measurement=meas, head=head, task=task)
        qcnn_train(qcnn, train, nn.Optimizer("adam", eta), steps, record_every=max(1, steps))
        rows.append({
            "model": "qcnn", "n": n, "seed": seed,
            "train_metric": _metric(task, lambda x: qcnn_predict(qcnn, x), train),
            "test_metric": _metric(task, lambda x: qcnn_predict(qcnn, x), test),
            "n_params": qcnn.n_params, "circuit_evals": train.size * n0,
        })

        qnn = build_qnn(n, qnn_layers, ansatz=spec.ansatz, task=task,
                        seed=seed + 1, encoder_seed=spec.random_seed)
        qnn_train(qnn, train, nn.Optimizer("adam", eta), qnn_steps,
                  record_every=max(1, qnn_steps))
        rows.append({
            "model": "qnn", "n": n, "seed": seed,
            "train_metric": _metric(task, lambda x: qnn_predict(qnn, x), train),
            "test_metric": _metric(task, lambda x: qnn_predict(qnn, x), test),
            "n_params": qnn.n_params, "circuit_evals": qnn.circuit_evals,
        })

        cnn = build_cnn(n, n0, task=task, init_scheme="he_scaled", seed=seed + 2)
        cnn_train(cnn, train, nn.Optimizer("adam", eta), steps, record_every=max(1, steps))
        rows.append({
            "model": "cnn", "n": n, "seed": seed,
            "train_metric": _metric(task, lambda x: cnn_predict(cnn, x), train),
            "test_metric": _metric(task, lambda x: cnn_predict(cnn, x), test),
            "n_params": cnn.n_params, "circuit_evals": 0,
        })
    return CompareReport(rows=rows)
