"""Data-encoding circuits.

Five classical-data ansatz families share the same skeleton: a Hadamard
layer, RZ(2*pi*x_i) single-qubit encodings, optional cross-term rotations
RZ(2*pi*x_i*x_j) on adjacent pairs, and an optional CNOT entangling chain.
The "QuantumData" encoder is RX(x_i) on each qubit followed by a fixed,
seeded random block (layers of U3 gates with angles from U(0, 2*pi) plus a
CNOT chain).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .gates import Gate

ANSATZE = ("A", "A4", "A4c", "B", "Bc", "QuantumData")

# ansatz -> (has cross terms, has CNOTs, block repeats)
_ANSATZ_TABLE = {
    "A": (True, True, 1),
    "A4": (True, True, 4),
    "A4c": (True, False, 4),
    "B": (False, True, 1),
    "Bc": (False, False, 1),
}

RANDOM_BLOCK_LAYERS = 2


@dataclass(frozen=True)
class EncoderSpec:
    ansatz: str
    n: int
    depth_repeats: int = 1
    random_seed: int = 0

    def __post_init__(self):
        if self.ansatz not in ANSATZE:
            raise ValueError(f"unknown ansatz {self.ansatz!r}")
        if self.depth_repeats < 1:
            raise ValueError("depth_repeats must be >= 1")

    def to_text(self) -> str:
        return (
            f"ansatz={self.ansatz} n={self.n} "
            f"depth={self.depth_repeats} seed={self.random_seed}"
        )

    @classmethod
    def from_text(cls, text: str) -> "EncoderSpec":
        fields = dict(item.split("=", 1) for item in text.split())
        return cls(
            ansatz=fields["ansatz"],
            n=int(fields["n"]),
            depth_repeats=int(fields["depth"]),
            random_seed=int(fields["seed"]),
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]


def default_spec(ansatz: str, n: int, random_seed: int = 0) -> EncoderSpec:
    """Spec with the depth the ansatz name implies (x4 for A4/A4c)."""
    depth = _ANSATZ_TABLE[ansatz][2] if ansatz in _ANSATZ_TABLE else 1
    return EncoderSpec(ansatz=ansatz, n=n, depth_repeats=depth, random_seed=random_seed)


def _classical_block(x: np.ndarray, n: int, cross: bool, cnot: bool) -> list[Gate]:
    gates = [Gate("H", (q,)) for q in range(n)]
    gates += [Gate("RZ", (q,), (2 * np.pi * float(x[q]),)) for q in range(n)]
    if cross:
        for q in range(n - 1):
            angle = 2 * np.pi * float(x[q]) * float(x[q + 1])
            if cnot:
                gates.append(Gate("CNOT", (q, q + 1)))
                gates.append(Gate("RZ", (q + 1,), (angle,)))
                gates.append(Gate("CNOT", (q, q + 1)))
            else:
                gates.append(Gate("RZ", (q + 1,), (angle,)))
    elif cnot:
        gates += [Gate("CNOT", (q, q + 1)) for q in range(n - 1)]
    return gates


def random_block(n: int, seed: int, layers: int = RANDOM_BLOCK_LAYERS) -> list[Gate]:
    """Fixed random circuit: U3 with U(0, 2*pi) angles plus a CNOT chain."""
    rng = np.random.default_rng(seed)
    gates: list[Gate] = []
    for _ in range(layers):
        for q in range(n):
            angles = tuple(rng.uniform(0, 2 * np.pi, size=3))
            gates.append(Gate("U3", (q,), angles))
        gates += [Gate("CNOT", (q, q + 1)) for q in range(n - 1)]
    return gates


def compile_encoder(spec: EncoderSpec, x: np.ndarray) -> list[Gate]:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"data vector length {x.shape} does not match n={spec.n}")
    if spec.ansatz == "QuantumData":
        gates = [Gate("RX", (q,), (float(x[q]),)) for q in range(spec.n)]
        return gates + random_block(spec.n, spec.random_seed)
    cross, cnot, _ = _ANSATZ_TABLE[spec.ansatz]
    gates: list[Gate] = []
    for _ in range(spec.depth_repeats):
        gates += _classical_block(x, spec.n, cross, cnot)
    return gates
