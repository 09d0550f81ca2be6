"""Benchmark the compiled gate kernels against the numpy fallback.

Runs identical random circuits through both backends and reports
per-backend wall time plus the speedup ratio. Usage:

    python3 benchmarks/bench_gates.py [--qubits 14] [--gates 2000] [--repeats 3]
"""

import argparse
import time

import numpy as np

from qntklab.qsim import _gates_np
from qntklab.qsim.gates import rx_matrix

try:
    from qntklab.qsim import _gates_cy
except ImportError:
    _gates_cy = None


def random_program(n, n_gates, rng):
    """(kind, args) list mixing single-qubit rotations and CNOTs."""
    program = []
    for _ in range(n_gates):
        if rng.random() < 0.7 or n == 1:
            program.append(("1q", rx_matrix(rng.uniform(0, 2 * np.pi)), int(rng.integers(n))))
        else:
            c, t = rng.choice(n, size=2, replace=False)
            program.append(("cnot", int(c), int(t)))
    return program


def run(kernels, program, n):
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = 1.0
    start = time.perf_counter()
    for op in program:
        if op[0] == "1q":
            kernels.apply_1q(amps, op[1], op[2], n)
        else:
            kernels.apply_cnot(amps, op[1], op[2], n)
    return time.perf_counter() - start, amps


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--qubits", type=int, default=14)
    parser.add_argument("--gates", type=int, default=2000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    program = random_program(args.qubits, args.gates, rng)

    backends = [("numpy", _gates_np)]
    if _gates_cy is not None:
        backends.append(("cython", _gates_cy))
    else:
        print("compiled backend unavailable; benchmarking numpy only")

    times = {}
    states = {}
    for name, kernels in backends:
        best = float("inf")
        for _ in range(args.repeats):
            elapsed, amps = run(kernels, program, args.qubits)
            best = min(best, elapsed)
        times[name] = best
        states[name] = amps
        rate = args.gates / best
        print(f"{name:>8}: {best * 1e3:8.1f} ms   ({rate:,.0f} gates/s)")

    if len(backends) == 2:
        diff = np.abs(states["numpy"] - states["cython"]).max()
        print(f"max amplitude difference: {diff:.2e}")
        print(f"speedup (cython over numpy): {times['numpy'] / times['cython']:.2f}x")


if __name__ == "__main__":
    main()
