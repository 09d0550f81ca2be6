import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qntklab.qsim import (
    EncoderSpec,
    Gate,
    LocalObservable,
    RandomMeasurement,
    all_reduced_densities,
    apply_circuit,
    apply_gate,
    compile_encoder,
    expectation,
    features_from_reduced,
    haar_unitaries,
    quantum_features,
    reduced_density,
    run_circuit,
    sample_expectation,
    sample_product_2design,
    trace_product,
    zero_state,
)
from qntklab.qsim.gates import PAULI_Z, gate_matrix, u3_matrix


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    amps /= np.linalg.norm(amps)
    from qntklab.qsim import Statevector

    return Statevector(n, amps)


def dense_gate(gate, n):
    """Kron-product oracle for a gate acting on an n-qubit register."""
    if gate.kind == "CNOT":
        c, t = gate.targets
        p0 = np.array([[1, 0], [0, 0]], dtype=complex)
        p1 = np.array([[0, 0], [0, 1]], dtype=complex)
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        term0 = [np.eye(2, dtype=complex)] * n
        term1 = [np.eye(2, dtype=complex)] * n
        term0[c] = p0
        term1[c] = p1
        term1[t] = x
        out0 = out1 = np.eye(1, dtype=complex)
        for a, b in zip(term0, term1):
            out0 = np.kron(out0, a)
            out1 = np.kron(out1, b)
        return out0 + out1
    mats = [np.eye(2, dtype=complex)] * n
    mats[gate.targets[0]] = gate_matrix(gate)
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


class TestZeroState:
    def test_single_qubit(self):
        assert np.array_equal(zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        assert np.array_equal(zero_state(2).amplitudes, [1, 0, 0, 0])

    def test_shape_and_norm(self):
        s = zero_state(3)
        assert s.amplitudes.shape == (8,)
        assert s.norm() == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [0, 15, -1])
    def test_out_of_range(self, n):
        with pytest.raises(ValueError):
            zero_state(n)


class TestApplyGate:
    def test_hadamard(self):
        s = apply_gate(zero_state(1), Gate("H", (0,)))
        np.testing.assert_allclose(s.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_bell_state(self):
        s = zero_state(2)
        apply_gate(s, Gate("H", (0,)))
        apply_gate(s, Gate("CNOT", (0, 1)))
        bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(s.amplitudes, bell, atol=1e-12)

    def test_u3_matches_dense_oracle(self):
        gate = Gate("U3", (1,), (0.7, -1.2, 2.5))
        s = random_state(3, 0)
        expected = dense_gate(gate, 3) @ s.amplitudes
        apply_gate(s, gate)
        np.testing.assert_allclose(s.amplitudes, expected, atol=1e-12)

    def test_cnot_matches_dense_oracle(self):
        gate = Gate("CNOT", (2, 0))
        s = random_state(3, 1)
        expected = dense_gate(gate, 3) @ s.amplitudes
        apply_gate(s, gate)
        np.testing.assert_allclose(s.amplitudes, expected, atol=1e-12)

    def test_bad_target(self):
        with pytest.raises(IndexError):
            apply_gate(zero_state(2), Gate("H", (2,)))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 5))
    def test_norm_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        s = random_state(n, seed)
        for _ in range(10):
            if rng.random() < 0.7 or n == 1:
                kind = rng.choice(["H", "RX", "RZ", "U3"])
                t = int(rng.integers(n))
                params = tuple(rng.uniform(0, 2 * np.pi, {"U3": 3, "H": 0}.get(kind, 1)))
                apply_gate(s, Gate(kind, (t,), params))
            else:
                c, t = rng.choice(n, 2, replace=False)
                apply_gate(s, Gate("CNOT", (int(c), int(t))))
        assert s.norm() == pytest.approx(1.0, abs=1e-12)


class TestGateValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Gate("RY2", (0,))

    def test_duplicate_targets(self):
        with pytest.raises(IndexError):
            Gate("CNOT", (1, 1))

    @pytest.mark.parametrize("kind,params", [("H", ()), ("RX", (0.3,)), ("RZ", (1.1,)), ("U3", (0.1, 0.2, 0.3))])
    def test_matrices_unitary(self, kind, params):
        m = gate_matrix(Gate(kind, (0,), params))
        np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)


class TestCompileEncoder:
    def test_bc_zero_input_gives_plus_state(self):
        spec = EncoderSpec(ansatz="Bc", n=2)
        s = run_circuit(2, compile_encoder(spec, np.zeros(2)))
        np.testing.assert_allclose(s.amplitudes, np.full(4, 0.5), atol=1e-12)

    def test_b_vs_bc_differ_by_cnot_layer(self):
        x = np.array([0.3, -0.4])
        gates_b = compile_encoder(EncoderSpec(ansatz="B", n=2), x)
        gates_bc = compile_encoder(EncoderSpec(ansatz="Bc", n=2), x)
        extra = [g for g in gates_b if g not in gates_bc]
        assert gates_b[: len(gates_bc)] == gates_bc
        assert all(g.kind == "CNOT" for g in extra)
        assert len(extra) == 1

    def test_a4_count_is_four_blocks(self):
        x = np.array([0.1, 0.2, 0.3])
        a = compile_encoder(EncoderSpec(ansatz="A", n=3), x)
        a4 = compile_encoder(EncoderSpec(ansatz="A4", n=3, depth_repeats=4), x)
        assert len(a4) == 4 * len(a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compile_encoder(EncoderSpec(ansatz="A", n=3), np.zeros(2))

    def test_quantum_data_deterministic(self):
        spec = EncoderSpec(ansatz="QuantumData", n=3, random_seed=11)
        x = np.array([0.5, 1.0, 1.5])
        assert compile_encoder(spec, x) == compile_encoder(spec, x)

    def test_spec_text_round_trip(self):
        spec = EncoderSpec(ansatz="A4c", n=4, depth_repeats=4, random_seed=9)
        assert EncoderSpec.from_text(spec.to_text()) == spec


class TestReducedDensity:
    def test_product_state(self):
        rho = reduced_density(zero_state(2), 1, 1)
        np.testing.assert_allclose(rho.entries, [[1, 0], [0, 0]], atol=1e-12)

    def test_bell_window_is_maximally_mixed(self):
        s = zero_state(2)
        apply_gate(s, Gate("H", (0,)))
        apply_gate(s, Gate("CNOT", (0, 1)))
        rho = reduced_density(s, 1, 1)
        np.testing.assert_allclose(rho.entries, np.eye(2) / 2, atol=1e-12)

    def test_against_dense_partial_trace(self):
        s = random_state(3, 5)
        rho = reduced_density(s, 2, 1).entries
        full = s.density_matrix().reshape(2, 2, 2, 2, 2, 2)
        oracle = np.einsum("aibajb->ij", full)
        np.testing.assert_allclose(rho, oracle, atol=1e-12)

    def test_invalid_window(self):
        with pytest.raises(IndexError):
            reduced_density(zero_state(4), 3, 2)

    def test_density_matrix_invariants(self):
        s = random_state(4, 7)
        for k in (1, 2):
            rho = reduced_density(s, k, 2).entries
            np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
            assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
            assert np.linalg.eigvalsh(rho).min() >= -1e-12

    def test_purity_sum_matches_dense_oracle(self):
        for n in (2, 4, 6):
            s = random_state(n, n)
            total = sum(
                trace_product(reduced_density(s, k, 1), reduced_density(s, k, 1))
                for k in range(1, n + 1)
            )
            full = s.density_matrix()
            oracle = 0.0
            for k in range(n):
                axes = [k] + [q for q in range(n) if q != k]
                psi = s.amplitudes.reshape((2,) * n).transpose(axes).reshape(2, -1)
                rho = psi @ psi.conj().T
                oracle += np.real(np.trace(rho @ rho))
            assert total == pytest.approx(oracle, abs=1e-10)
            del full


class TestTraceProduct:
    def test_pure_state_purity(self):
        rho = reduced_density(zero_state(2), 1, 1)
        assert trace_product(rho, rho) == pytest.approx(1.0)

    def test_maximally_mixed(self):
        from qntklab.qsim import DensityMatrix

        half = DensityMatrix(1, np.eye(2) / 2)
        assert trace_product(half, half) == pytest.approx(0.5)

    def test_orthogonal_states(self):
        from qntklab.qsim import DensityMatrix

        zero = DensityMatrix(1, np.diag([1.0, 0.0]).astype(complex))
        one = DensityMatrix(1, np.diag([0.0, 1.0]).astype(complex))
        assert trace_product(zero, one) == pytest.approx(0.0)

    def test_dimension_mismatch(self):
        from qntklab.qsim import DensityMatrix

        with pytest.raises(ValueError):
            trace_product(DensityMatrix(1, np.eye(2) / 2), DensityMatrix(2, np.eye(4) / 4))


class TestTwoDesignMoments:
    def test_second_moment(self):
        rng = np.random.default_rng(0)
        u = haar_unitaries(2, (10**5,), rng)
        vals = np.abs(u[:, 0, 0]) ** 2
        se = vals.std() / np.sqrt(vals.size)
        assert abs(vals.mean() - 0.5) < 3 * se

    def test_fourth_moment(self):
        rng = np.random.default_rng(1)
        u = haar_unitaries(2, (10**5,), rng)
        vals = np.abs(u[:, 0, 0]) ** 4
        se = vals.std() / np.sqrt(vals.size)
        assert abs(vals.mean() - 1 / 3) < 3 * se

    def test_unitarity(self):
        u = sample_product_2design(2, 3, np.random.default_rng(2), count=4)
        prod = np.einsum("ikab,ikcb->ikac", u, u.conj())
        np.testing.assert_allclose(prod, np.broadcast_to(np.eye(4), prod.shape), atol=1e-12)

    def test_determinism(self):
        u1 = sample_product_2design(1, 2, np.random.default_rng(3), count=5)
        u2 = sample_product_2design(1, 2, np.random.default_rng(3), count=5)
        np.testing.assert_array_equal(u1, u2)

    def test_bad_locality(self):
        with pytest.raises(ValueError):
            sample_product_2design(0, 2, np.random.default_rng(0))


class TestExpectation:
    def test_sigma_z_eigenstate(self):
        assert expectation(zero_state(1), PAULI_Z.astype(complex)) == pytest.approx(1.0)

    def test_sigma_z_plus_state(self):
        s = apply_gate(zero_state(1), Gate("H", (0,)))
        assert expectation(s, PAULI_Z.astype(complex)) == pytest.approx(0.0, abs=1e-12)

    def test_local_sum_matches_dense(self):
        s = random_state(3, 9)
        terms = [LocalObservable(PAULI_Z.astype(complex), q, 1) for q in range(3)]
        dense = np.zeros((8, 8), dtype=complex)
        for q in range(3):
            mats = [np.eye(2, dtype=complex)] * 3
            mats[q] = PAULI_Z.astype(complex)
            term = np.eye(1, dtype=complex)
            for m in mats:
                term = np.kron(term, m)
            dense += term
        assert expectation(s, terms) == pytest.approx(
            expectation(s, dense), abs=1e-10
        )

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            expectation(zero_state(1), np.array([[0, 1], [0, 0]], dtype=complex))


class TestSampleExpectation:
    def test_deterministic_eigenstate(self):
        rng = np.random.default_rng(0)
        val = sample_expectation(zero_state(1), PAULI_Z.astype(complex), 50, rng)
        assert val == pytest.approx(1.0)

    def test_plus_state_statistics(self):
        rng = np.random.default_rng(1)
        s = apply_gate(zero_state(1), Gate("H", (0,)))
        val = sample_expectation(s, PAULI_Z.astype(complex), 10**4, rng)
        assert abs(val) < 3 / np.sqrt(10**4)

    def test_zero_shots_rejected(self):
        with pytest.raises(ValueError):
            sample_expectation(zero_state(1), PAULI_Z.astype(complex), 0, np.random.default_rng(0))

    def test_variance_scaling(self):
        """Estimator variance ~ 1/n_shots (log-log slope -1 +- 0.1)."""
        s = apply_gate(zero_state(1), Gate("H", (0,)))
        rng = np.random.default_rng(2)
        shot_counts = [100, 1000, 10000]
        variances = []
        for n_shots in shot_counts:
            vals = [
                sample_expectation(s, PAULI_Z.astype(complex), n_shots, rng)
                for _ in range(200)
            ]
            variances.append(np.var(vals))
        slope = np.polyfit(np.log(shot_counts), np.log(variances), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.1)


class TestQuantumFeatures:
    def test_identity_unitaries_on_zero_state(self):
        n, m = 3, 1
        meas = RandomMeasurement(
            m=m,
            n_q=n,
            unitaries=np.broadcast_to(np.eye(2, dtype=complex), (4, n, 2, 2)).copy(),
            observable_local=PAULI_Z.astype(complex),
        )
        rhos = all_reduced_densities(zero_state(n), m)
        feats = features_from_reduced(rhos, meas)
        np.testing.assert_allclose(feats, np.full(4, n), atol=1e-12)

    def test_operator_norm_bound(self):
        spec = EncoderSpec(ansatz="B", n=2)
        meas = RandomMeasurement.sample(2, 1, 50, np.random.default_rng(4))
        f = quantum_features(np.array([0.3, 0.8]), spec, meas)
        assert np.all(np.abs(f) <= 2 + 1e-12)

    def test_shot_path_converges(self):
        spec = EncoderSpec(ansatz="B", n=2)
        meas = RandomMeasurement.sample(2, 1, 20, np.random.default_rng(5))
        x = np.array([0.3, 0.8])
        exact = quantum_features(x, spec, meas)
        noisy = quantum_features(x, spec, meas, shots=10**5, rng=np.random.default_rng(6))
        assert np.max(np.abs(exact - noisy)) < 0.1

    def test_window_mismatch(self):
        spec = EncoderSpec(ansatz="B", n=2)
        meas = RandomMeasurement.sample(4, 2, 5, np.random.default_rng(7))
        with pytest.raises(ValueError):
            quantum_features(np.array([0.3, 0.8]), spec, meas)

    def test_feature_covariance_matches_theorem(self):
        """Mean over i of f_i(x) f_i(x') converges to Sigma_Q^(1) - xi^2."""
        from qntklab.kernel import ProjectedQuantumKernel

        spec = EncoderSpec(ansatz="B", n=2)
        meas = RandomMeasurement.sample(2, 1, 10**5, np.random.default_rng(8))
        x, xp = np.array([0.21, 0.73]), np.array([0.55, 0.11])
        fx = quantum_features(x, spec, meas)
        fxp = quantum_features(xp, spec, meas)
        prods = fx * fxp
        se = prods.std() / np.sqrt(prods.size)
        analytic = ProjectedQuantumKernel(spec, 1)(x, xp)
        assert abs(prods.mean() - analytic) < 3 * se
