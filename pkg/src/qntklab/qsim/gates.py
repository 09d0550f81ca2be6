"""Gate descriptions and their unitary matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GATE_KINDS = ("H", "RX", "RZ", "CNOT", "U3")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise IndexError(f"duplicate target qubits in {self.targets}")


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]])


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """General single-qubit rotation, RZ(phi) RY(theta) RZ(lam) up to phase."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
        ]
    )


def gate_matrix(gate: Gate) -> np.ndarray:
    """Dense matrix of a single-qubit gate (CNOT is applied structurally)."""
    if gate.kind == "H":
        return _H
    if gate.kind == "RX":
        return rx_matrix(gate.params[0])
    if gate.kind == "RZ":
        return rz_matrix(gate.params[0])
    if gate.kind == "U3":
        return u3_matrix(*gate.params)
    raise ValueError(f"no dense 2x2 matrix for {gate.kind}")


CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
