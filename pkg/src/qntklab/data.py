"""Dataset generators and loaders for the experiments.

Regression targets (sin and a harder oscillatory variant), a CSV loader
with per-column affine normalization for external classification data, a
synthetic two-dimensional stand-in classification rule, and inputs labeled
by a fixed random quantum circuit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .qsim import EncoderSpec, PAULI_Z, encoded_state, expectation
from .qsim.state import LocalObservable


@dataclass
class Dataset:
    inputs: np.ndarray  # (N_D, n)
    labels: np.ndarray  # (N_D,)
    split: str = "train"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels must have equal length")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"f{i + 1}" for i in range(self.n_features)] + ["y"])
            for x, y in zip(self.inputs, self.labels):
                writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        sidecar = str(path) + ".provenance.json"
        with open(sidecar, "w") as fh:
            json.dump({"split": self.split, **self.provenance}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _poly_embed(x: np.ndarray) -> np.ndarray:
    """Map scalars to the (x, x^2, x^3, x^4) feature vector."""
    return np.stack([x, x**2, x**3, x**4], axis=1)


def gen_sin(n_d: int, noise_sd: float = 0.05, rng=None, seed: int | None = None) -> Dataset:
    """sin(x) regression with Gaussian label noise, x ~ U(-1, 1)."""
    if n_d < 1:
        raise ValueError("need at least one sample")
    if rng is None:
        rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n_d)
    y = np.sin(x) + noise_sd * rng.standard_normal(n_d)
    return Dataset(
        inputs=_poly_embed(x),
        labels=y,
        provenance={"generator": "gen_sin", "noise_sd": noise_sd, "seed": seed},
    )


def gen_hard_sin(n_d: int, rng=None, seed: int | None = None) -> Dataset:
    """Noise-free (x - 0.2)^2 sin(12x) regression target, x ~ U(-1, 1)."""
    if n_d < 1:
        raise ValueError("need at least one sample")
    if rng is None:
        rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n_d)
    y = (x - 0.2) ** 2 * np.sin(12.0 * x)
    return Dataset(
        inputs=_poly_embed(x),
        labels=y,
        provenance={"generator": "gen_hard_sin", "seed": seed},
    )


def load_csv_classification(
    path, n_features: int, normalize_to: tuple[float, float] = (-1.0, 1.0)
) -> Dataset:
    """External classification CSV: feature columns then a {0,1} label column.

    Each feature column is affinely mapped onto the target interval; a
    constant column maps to the interval midpoint.
    """
    lo, hi = normalize_to
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and not _is_number(row[0]):
                continue  # header row
            if len(row) != n_features + 1:
                raise ValueError(
                    f"line {lineno}: expected {n_features + 1} columns, got {len(row)}"
                )
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise ValueError(f"line {lineno}: malformed feature value") from exc
            label = row[-1].strip()
            try:
                label_val = float(label)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: label must be 0 or 1, got {label!r}") from exc
            if label_val not in (0.0, 1.0):
                raise ValueError(f"line {lineno}: label must be 0 or 1, got {label!r}")
            rows.append(feats + [label_val])
    if not rows:
        raise ValueError("no data rows in file")
    arr = np.asarray(rows)
    feats, labels = arr[:, :-1], arr[:, -1]
    cmin, cmax = feats.min(axis=0), feats.max(axis=0)
    span = cmax - cmin
    mid = 0.5 * (lo + hi)
    scaled = np.where(
        span > 0,
        lo + (feats - cmin) * (hi - lo) / np.where(span > 0, span, 1.0),
        mid,
    )
    return Dataset(
        inputs=scaled,
        labels=labels,
        provenance={"generator": "load_csv_classification", "path": str(path)},
    )


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def gen_adhoc_substitute(n_per_class: int, rng=None, seed: int | None = None) -> Dataset:
    """Balanced 2-d classification stand-in: y = 1 iff sin(3*pi*x1)*sin(3*pi*x2) > 0."""
    if n_per_class < 1:
        raise ValueError("need at least one sample per class")
    if rng is None:
        rng = np.random.default_rng(seed)
    xs, ys = [], []
    want = {0: n_per_class, 1: n_per_class}
    while want[0] or want[1]:
        x = rng.uniform(-1.0, 1.0, size=2)
        label = 1 if np.sin(3 * np.pi * x[0]) * np.sin(3 * np.pi * x[1]) > 0 else 0
        if want[label]:
            xs.append(x)
            ys.append(label)
            want[label] -= 1
    return Dataset(
        inputs=np.array(xs),
        labels=np.array(ys, dtype=float),
        provenance={"generator": "gen_adhoc_substitute", "seed": seed},
    )


def count_observable(n: int) -> list[LocalObservable]:
    """Sum form: the number-of-up-qubits operator, eigenvalues 0..n."""
    single = (PAULI_Z + np.eye(2)) / 2.0
    return [LocalObservable(matrix=single, start=q, width=1) for q in range(n)]


def product_observable(n: int) -> np.ndarray:
    """Product form: projector onto |0...0>, eigenvalues {0, 1}."""
    op = np.eye(1)
    single = (PAULI_Z + np.eye(2)) / 2.0
    for _ in range(n):
        op = np.kron(op, single)
    return op.astype(complex)


def circuit_label_fn(n: int, encoder_seed: int = 0, observable: str = "sum"):
    """(g, spec): the scalar circuit output g(x) and the frozen encoder."""
    spec = EncoderSpec(ansatz="QuantumData", n=n, random_seed=encoder_seed)
    if observable == "sum":
        obs = count_observable(n)
    elif observable == "product":
        obs = product_observable(n)
    else:
        raise ValueError("observable must be 'sum' or 'product'")

    def g(x: np.ndarray) -> float:
        return expectation(encoded_state(spec, x), obs)

    return g, spec


def gen_quantum_data(
    n: int,
    n_d: int,
    task: str,
    rng=None,
    seed: int | None = None,
    encoder_seed: int = 0,
    observable: str = "sum",
    noise_var: float = 1e-4,
    c_scale: float | None = None,
) -> tuple[Dataset, EncoderSpec]:
    """Inputs x ~ U[0, 2*pi]^n labeled by a fixed random circuit.

    Regression: y = c*g(x) + eps with c chosen so the clean labels have unit
    variance (or passed in via `c_scale` to reuse a training-set estimate).
    Classification: y = 1 iff g(x) >= n/2 with the sum-form observable.
    """
    if task not in ("regression", "classification"):
        raise ValueError("task must be 'regression' or 'classification'")
    if n < 2:
        raise ValueError("need at least two qubits")
    if rng is None:
        rng = np.random.default_rng(seed)
    g, spec = circuit_label_fn(n, encoder_seed, observable)
    xs = rng.uniform(0.0, 2.0 * np.pi, size=(n_d, n))
    gs = np.array([g(x) for x in xs])
    provenance = {
        "generator": "gen_quantum_data",
        "n": n,
        "task": task,
        "seed": seed,
        "encoder_seed": encoder_seed,
        "observable": observable,
    }
    if task == "classification":
        threshold = n / 2.0 if observable == "sum" else 0.5
        labels = (gs >= threshold).astype(float)
        provenance["threshold"] = threshold
    else:
        c = c_scale if c_scale is not None else 1.0 / float(np.std(gs))
        labels = c * gs + np.sqrt(noise_var) * rng.standard_normal(n_d)
        provenance["c_scale"] = c
        provenance["noise_var"] = noise_var
    return Dataset(inputs=xs, labels=labels, provenance=provenance), spec


def split(dataset: Dataset, n_test: int, rng=None, seed: int | None = None) -> tuple[Dataset, Dataset]:
    """Disjoint train/test partition by random permutation."""
    if n_test <= 0:
        raise ValueError("test size must be positive")
    if n_test >= dataset.size:
        raise ValueError("test size must leave at least one training sample")
    if rng is None:
        rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.size)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    prov = dict(dataset.provenance)
    train = Dataset(dataset.inputs[train_idx], dataset.labels[train_idx], "train", prov)
    test = Dataset(dataset.inputs[test_idx], dataset.labels[test_idx], "test", dict(prov))
    return train, test
