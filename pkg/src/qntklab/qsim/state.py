"""Statevector simulation: states, observables, reduced density matrices.

Convention: qubit 0 is the most significant bit of the amplitude index.
The maximum register size is 14 qubits, which keeps every dense operation
at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .backend import kernels
from .gates import Gate, gate_matrix

MAX_QUBITS = 14
_HERMITICITY_TOL = 1e-10


@dataclass
class Statevector:
    n: int
    amplitudes: np.ndarray

    def copy(self) -> "Statevector":
        return Statevector(self.n, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass
class DensityMatrix:
    m: int
    entries: np.ndarray


@dataclass(frozen=True)
class LocalObservable:
    """Operator ``I x A x I`` acting on `width` qubits starting at `start`."""

    matrix: np.ndarray
    start: int
    width: int


def zero_state(n: int) -> Statevector:
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1.0
    return Statevector(n, amps)


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    """Apply one gate, returning the same (mutated) state."""
    for t in gate.targets:
        if not 0 <= t < state.n:
            raise IndexError(f"target qubit {t} out of range for n={state.n}")
    if gate.kind == "CNOT":
        control, target = gate.targets
        kernels.apply_cnot(state.amplitudes, control, target, state.n)
    else:
        (target,) = gate.targets
        kernels.apply_1q(state.amplitudes, gate_matrix(gate), target, state.n)
    return state


def apply_circuit(state: Statevector, gates: Iterable[Gate]) -> Statevector:
    for g in gates:
        apply_gate(state, g)
    return state


def run_circuit(n: int, gates: Iterable[Gate]) -> Statevector:
    return apply_circuit(zero_state(n), gates)


def reduced_density(state: Statevector, k: int, m: int) -> DensityMatrix:
    """Reduced density matrix of window k (1-based) of m contiguous qubits."""
    n = state.n
    if n % m != 0:
        raise ValueError(f"n={n} not divisible by locality m={m}")
    n_q = n // m
    if not 1 <= k <= n_q:
        raise IndexError(f"window index {k} out of range (1..{n_q})")
    start = (k - 1) * m
    axes = list(range(start, start + m))
    rest = [q for q in range(n) if q not in axes]
    psi = state.amplitudes.reshape((2,) * n).transpose(axes + rest)
    psi = psi.reshape(1 << m, -1)
    return DensityMatrix(m, psi @ psi.conj().T)


def all_reduced_densities(state: Statevector, m: int) -> np.ndarray:
    """Stack of the n/m window density matrices, shape (n_Q, 2^m, 2^m)."""
    n_q = state.n // m
    return np.stack(
        [reduced_density(state, k, m).entries for k in range(1, n_q + 1)]
    )


def trace_product(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    if rho1.entries.shape != rho2.entries.shape:
        raise ValueError("density matrix dimensions do not match")
    return float(np.real(np.sum(rho1.entries * rho2.entries.T)))


def _check_hermitian(mat: np.ndarray) -> None:
    if not np.allclose(mat, mat.conj().T, atol=_HERMITICITY_TOL):
        raise ValueError("observable is not Hermitian")


def _embed_local(obs: LocalObservable, n: int) -> np.ndarray:
    left = np.eye(1 << obs.start)
    right = np.eye(1 << (n - obs.start - obs.width))
    return np.kron(np.kron(left, obs.matrix), right)


def expectation(
    state: Statevector,
    observable: np.ndarray | LocalObservable | Sequence[LocalObservable],
) -> float:
    """<psi|O|psi> for a dense matrix or a sum of local terms."""
    amps = state.amplitudes
    if isinstance(observable, np.ndarray):
        _check_hermitian(observable)
        if observable.shape[0] != amps.shape[0]:
            raise ValueError("observable dimension does not match state")
        return float(np.real(np.vdot(amps, observable @ amps)))
    terms = [observable] if isinstance(observable, LocalObservable) else list(observable)
    total = 0.0
    for term in terms:
        _check_hermitian(term.matrix)
        view = amps.reshape(1 << term.start, 1 << term.width, -1)
        acted = np.einsum("ab,ibj->iaj", term.matrix, view)
        total += float(np.real(np.vdot(view, acted)))
    return total


def _dense_observable(
    observable: np.ndarray | LocalObservable | Sequence[LocalObservable], n: int
) -> np.ndarray:
    if isinstance(observable, np.ndarray):
        return observable
    terms = [observable] if isinstance(observable, LocalObservable) else list(observable)
    return sum(_embed_local(t, n) for t in terms)


def sample_expectation(
    state: Statevector,
    observable: np.ndarray | LocalObservable | Sequence[LocalObservable],
    n_shots: int,
    rng: np.random.Generator,
) -> float:
    """Empirical mean of `n_shots` single-shot measurements of the observable."""
    if n_shots <= 0:
        raise ValueError("n_shots must be positive")
    dense = _dense_observable(observable, state.n)
    _check_hermitian(dense)
    off_diag = dense - np.diag(np.diag(dense))
    if np.max(np.abs(off_diag)) < 1e-14:
        values = np.real(np.diag(dense))
        probs = np.abs(state.amplitudes) ** 2
    else:
        values, vecs = np.linalg.eigh(dense)
        rotated = vecs.conj().T @ state.amplitudes
        probs = np.abs(rotated) ** 2
    probs = probs / probs.sum()
    counts = rng.multinomial(n_shots, probs)
    return float(counts @ values / n_shots)
