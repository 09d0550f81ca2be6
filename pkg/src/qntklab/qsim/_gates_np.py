"""Pure numpy gate kernels (fallback backend).

Qubit 0 is the most significant bit of the amplitude index, so the state of
``|q0 q1 ... q_{n-1}>`` lives at index ``sum(q_i * 2**(n-1-i))``.
"""

import numpy as np

NAME = "numpy"


def apply_1q(amps: np.ndarray, mat: np.ndarray, target: int, n: int) -> np.ndarray:
    """Apply a 2x2 matrix to qubit `target`, in place."""
    view = amps.reshape(1 << target, 2, -1)
    out = np.einsum("ab,ibj->iaj", mat, view)
    view[:] = out
    return amps


def apply_cnot(amps: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    """Apply CNOT with the given control/target qubits, in place."""
    a = amps.reshape((2,) * n)
    idx = [slice(None)] * n
    idx[control] = 1
    sub = a[tuple(idx)]
    # target axis index in the sliced view
    t = target - (1 if control < target else 0)
    a[tuple(idx)] = np.flip(sub, axis=t).copy()
    return amps
