"""Random product-unitary measurements for quantum feature extraction.

Each measurement row is a product unitary U = U^1 x ... x U^{n_Q} with the
factors drawn Haar-uniformly from U(2^m); Haar measure is a unitary 2-design,
so the sampled moments satisfy the element-wise 2-design integration
identities used by the analytic kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import EncoderSpec, compile_encoder
from .gates import PAULI_Z
from .state import Statevector, all_reduced_densities, run_circuit


def default_local_observable(m: int) -> np.ndarray:
    """Traceless window observable: sigma_z on the window's first qubit."""
    return np.kron(PAULI_Z, np.eye(1 << (m - 1))).astype(complex)


def haar_unitaries(dim: int, size: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitaries of the given dimension, batch shape `size`."""
    z = rng.standard_normal(size + (dim, dim)) + 1j * rng.standard_normal(size + (dim, dim))
    q, r = np.linalg.qr(z / np.sqrt(2))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def sample_product_2design(
    m: int, n_q: int, rng: np.random.Generator, count: int = 1
) -> np.ndarray:
    """`count` independent product unitaries, shape (count, n_q, 2^m, 2^m)."""
    if m < 1:
        raise ValueError("locality m must be >= 1")
    return haar_unitaries(1 << m, (count, n_q), rng)


@dataclass
class RandomMeasurement:
    m: int
    n_q: int
    unitaries: np.ndarray  # (n_0, n_q, 2^m, 2^m)
    observable_local: np.ndarray  # (2^m, 2^m), traceless Hermitian

    def __post_init__(self):
        obs = self.observable_local
        if abs(np.trace(obs)) > 1e-12:
            raise ValueError("local observable must be traceless")
        if not np.allclose(obs, obs.conj().T, atol=1e-12):
            raise ValueError("local observable must be Hermitian")

    @property
    def n_features(self) -> int:
        return self.unitaries.shape[0]

    @classmethod
    def sample(
        cls,
        n: int,
        m: int,
        n_features: int,
        rng: np.random.Generator,
        observable_local: np.ndarray | None = None,
    ) -> "RandomMeasurement":
        if n % m != 0:
            raise ValueError(f"n={n} not divisible by locality m={m}")
        n_q = n // m
        obs = default_local_observable(m) if observable_local is None else observable_local
        unitaries = sample_product_2design(m, n_q, rng, count=n_features)
        return cls(m=m, n_q=n_q, unitaries=unitaries, observable_local=obs)


def encoded_state(spec: EncoderSpec, x: np.ndarray) -> Statevector:
    return run_circuit(spec.n, compile_encoder(spec, x))


def features_from_reduced(
    rhos: np.ndarray, meas: RandomMeasurement, shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Feature vector from window density matrices, shape (n_0,).

    Exact path: f_i = sum_k Tr(U_i^k^dag O U_i^k rho^k).
    Shot path: each window's rotated observable is measured in its eigenbasis
    `shots` times; window outcomes are summed.
    """
    if rhos.shape[0] != meas.n_q:
        raise ValueError("window count mismatch between state and measurement")
    u = meas.unitaries
    obs = meas.observable_local
    # rotated observable per (feature, window): U^dag O U
    rotated = np.einsum("ikba,bc,ikcd->ikad", u.conj(), obs, u)
    if shots is None:
        return np.real(np.einsum("ikad,kda->i", rotated, rhos))
    if shots <= 0:
        raise ValueError("shots must be positive")
    if rng is None:
        raise ValueError("shot sampling requires an rng")
    values, vecs = np.linalg.eigh(obs)
    # p[i, k, j]: probability of eigenvalue j when measuring window k of row i
    rho_rot = np.einsum("ikab,kbc,ikdc->ikad", u, rhos, u.conj())
    probs = np.real(np.einsum("aj,ikab,bj->ikj", vecs.conj(), rho_rot, vecs))
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum(axis=-1, keepdims=True)
    counts = rng.multinomial(shots, probs)
    return (counts @ values).sum(axis=1) / shots


def quantum_features(
    x: np.ndarray,
    spec: EncoderSpec,
    meas: RandomMeasurement,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """n_0-dimensional feature vector of a single input."""
    if spec.n != meas.m * meas.n_q:
        raise ValueError("encoder qubit count does not match measurement windows")
    state = encoded_state(spec, x)
    rhos = all_reduced_densities(state, meas.m)
    return features_from_reduced(rhos, meas, shots=shots, rng=rng)


def feature_matrix(
    xs: np.ndarray,
    spec: EncoderSpec,
    meas: RandomMeasurement,
    shots: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Features for a dataset, shape (N_D, n_0)."""
    return np.stack(
        [quantum_features(x, spec, meas, shots=shots, rng=rng) for x in xs]
    )
