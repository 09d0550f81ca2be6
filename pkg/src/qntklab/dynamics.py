"""Spectral training dynamics in the constant-kernel regime.

Mean-squared-error gradient flow has the closed-form solution
f_t = V^T e^{-eta*lambda*t} V (f_0 - y) + y in the kernel eigenbasis;
cross-entropy flow is integrated numerically (RK4). Expected-cost formulas
use the bottom-eigenvalue index set S = {j : lambda_j < 1/(eta*tau)}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .kernel import KernelMatrix

EIG_ZERO_REL = 1e-12


def _entries(kernel) -> np.ndarray:
    return kernel.entries if isinstance(kernel, KernelMatrix) else np.asarray(kernel)


@dataclass
class SpectralModel:
    eigenvalues: np.ndarray  # descending, rows of V are eigenvectors
    eigenvectors: np.ndarray
    y: np.ndarray
    f0: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eigenvalue"] + [f"v{i}" for i in range(self.size)])
            for lam, row in zip(self.eigenvalues, self.eigenvectors):
                writer.writerow([repr(float(lam))] + [repr(float(v)) for v in row])


@dataclass
class Trajectory:
    times: np.ndarray
    outputs: np.ndarray  # (T, N_D)
    cost: np.ndarray  # (T,)

    def to_csv(self, path) -> None:
        n = self.outputs.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "cost"] + [f"f{i}" for i in range(n)])
            for t, c, row in zip(self.times, self.cost, self.outputs):
                writer.writerow(
                    [repr(float(t)), repr(float(c))] + [repr(float(v)) for v in row]
                )


@dataclass
class Schedule:
    eta: float
    tau: float

    def bottom_set(self, eigenvalues: np.ndarray) -> np.ndarray:
        """Boolean mask of the slow modes, lambda_j < 1/(eta*tau)."""
        return np.asarray(eigenvalues) < 1.0 / (self.eta * self.tau)


def mse_cost(outputs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared-error cost 0.5 * sum_a (f_a - y_a)^2 per time row."""
    resid = outputs - y
    return 0.5 * np.sum(resid * resid, axis=-1)


def bce_cost(outputs: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Binary cross entropy with the sigmoid applied to the raw outputs."""
    z = outputs
    # stable log(sigma(z)) and log(1 - sigma(z))
    log_sig = -np.logaddexp(0.0, -z)
    log_one_minus = -np.logaddexp(0.0, z)
    return -np.sum(y * log_sig + (1.0 - y) * log_one_minus, axis=-1)


def diagonalize(kernel, y, f0) -> SpectralModel:
    k = _entries(kernel)
    if not np.allclose(k, k.T, atol=1e-8 * max(1.0, np.abs(k).max())):
        raise ValueError("kernel matrix must be symmetric")
    eigvals, eigvecs = np.linalg.eigh((k + k.T) / 2.0)
    order = np.argsort(eigvals)[::-1]
    return SpectralModel(
        eigenvalues=eigvals[order],
        eigenvectors=eigvecs[:, order].T,
        y=np.asarray(y, dtype=float),
        f0=np.asarray(f0, dtype=float),
    )


def mse_trajectory(model: SpectralModel, eta: float, times) -> Trajectory:
    """Closed-form gradient-flow solution of the squared-error dynamics."""
    if eta <= 0:
        raise ValueError("learning rate must be positive")
    times = np.asarray(times, dtype=float)
    v = model.eigenvectors
    w0 = v @ (model.f0 - model.y)  # residual in the eigenbasis
    decay = np.exp(-eta * np.outer(times, model.eigenvalues))
    outputs = (decay * w0) @ v + model.y
    return Trajectory(times=times, outputs=outputs, cost=mse_cost(outputs, model.y))


def decay_factors(eigenvalues: np.ndarray, eta: float, t: float) -> np.ndarray:
    """D_j = (1 - e^{-eta*lambda_j*t}) / lambda_j, with the lambda->0 limit."""
    lam = np.asarray(eigenvalues, dtype=float)
    lam_max = np.max(np.abs(lam)) if lam.size else 1.0
    zero = np.abs(lam) <= EIG_ZERO_REL * max(lam_max, 1.0)
    safe = np.where(zero, 1.0, lam)
    d = -np.expm1(-eta * safe * t) / safe
    return np.where(zero, eta * t, d)


def predict(
    kernel_row: np.ndarray,
    model: SpectralModel,
    eta: float,
    t: float,
    f0_at_x: float = 0.0,
    mean: bool = False,
) -> float:
    """Off-dataset prediction from the kernel row Theta(x, x^1..x^N).

    With `mean=True` the initial outputs are averaged out and the result is
    the expected prediction given only the labels.
    """
    row = np.asarray(kernel_row, dtype=float)
    if row.shape != (model.size,):
        raise ValueError("kernel row length does not match dataset size")
    v = model.eigenvectors
    d = decay_factors(model.eigenvalues, eta, t)
    if mean:
        return float(row @ (v.T @ (d * (v @ model.y))))
    correction = row @ (v.T @ (d * (v @ (model.f0 - model.y))))
    return float(f0_at_x - correction)


def bce_trajectory(
    kernel,
    y,
    f0,
    eta: float,
    step: float,
    t_end: float,
    record_every: int = 1,
) -> Trajectory:
    """Fixed-step RK4 integration of the cross-entropy gradient flow."""
    if step <= 0:
        raise ValueError("integration step must be positive")
    k = _entries(kernel)
    y = np.asarray(y, dtype=float)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must lie in {0, 1}")
    f = np.asarray(f0, dtype=float).copy()

    def rhs(fv):
        sig = 1.0 / (1.0 + np.exp(-fv))
        return -eta * (k @ (sig - y))

    n_steps = int(round(t_end / step))
    times = [0.0]
    outputs = [f.copy()]
    for i in range(1, n_steps + 1):
        k1 = rhs(f)
        k2 = rhs(f + 0.5 * step * k1)
        k3 = rhs(f + 0.5 * step * k2)
        k4 = rhs(f + step * k3)
        f = f + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if i % record_every == 0 or i == n_steps:
            times.append(i * step)
            outputs.append(f.copy())
    outputs = np.array(outputs)
    return Trajectory(
        times=np.array(times), outputs=outputs, cost=bce_cost(outputs, y)
    )


def expected_cost(
    ntk_model: SpectralModel,
    cov_gram,
    y,
    eta: float,
    tau: float,
    mode: str = "step",
) -> float:
    """Average cost at stopping time tau over Gaussian initial outputs.

    "step" uses the hard bottom-eigenvalue cutoff; "exact" uses the true
    residual decay e^{-2*eta*lambda_j*tau}.
    """
    if mode not in ("step", "exact"):
        raise ValueError("mode must be 'step' or 'exact'")
    cov = _entries(cov_gram)
    y = np.asarray(y, dtype=float)
    if cov.shape[0] != ntk_model.size or y.size != ntk_model.size:
        raise ValueError("covariance/labels do not match the kernel dataset")
    v = ntk_model.eigenvectors
    lam = ntk_model.eigenvalues
    g = v @ y
    init_var = np.einsum("ja,ab,jb->j", v, cov, v)
    if mode == "step":
        weights = Schedule(eta, tau).bottom_set(lam).astype(float)
    else:
        weights = np.exp(-2.0 * eta * lam * tau)
    n_d = ntk_model.size
    return float(np.sum(weights * (init_var + g * g)) / n_d)


def advantage_gap(
    classical: tuple[SpectralModel, object],
    quantum: tuple[SpectralModel, object],
    y,
    eta: float,
    tau: float,
    mode: str = "step",
) -> float:
    """Classical minus quantum expected cost; positive favors the hybrid."""
    c_model, c_cov = classical
    q_model, q_cov = quantum
    return expected_cost(c_model, c_cov, y, eta, tau, mode) - expected_cost(
        q_model, q_cov, y, eta, tau, mode
    )
