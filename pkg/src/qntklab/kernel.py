"""Analytic infinite-width kernels and empirical tangent kernels.

The first-layer covariance is either the classical inner-product kernel or
the projected-quantum-state kernel; deeper layers follow the activation
recursion (closed form for ReLU, Gaussian Monte-Carlo otherwise), and the
tangent kernel accumulates layer by layer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .qsim import (
    EncoderSpec,
    RandomMeasurement,
    all_reduced_densities,
    default_local_observable,
    encoded_state,
)

KERNEL_KINDS = ("Sigma", "Theta", "SigmaQ", "ThetaQ", "Empirical")

PD_TOL = 1e-10


@dataclass
class KernelMatrix:
    entries: np.ndarray
    kind: str = "Empirical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    def to_csv(self, path) -> None:
        meta = " ".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        header = f"# kind={self.kind} {meta}".strip()
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            writer = csv.writer(fh)
            for row in self.entries:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "KernelMatrix":
        with open(path) as fh:
            header = fh.readline().strip().lstrip("# ")
            fields = dict(item.split("=", 1) for item in header.split())
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        kind = fields.pop("kind")
        return cls(entries=np.array(rows), kind=kind, meta=fields)


@dataclass
class PDReport:
    min_eigenvalue: float
    max_eigenvalue: float
    is_pd: bool
    degeneracy_witness: np.ndarray | None = None
    condition: str | None = None  # "i", "ii", or None


# ---------------------------------------------------------------------------
# first-layer kernels


def sigma_classical_1(x, xp, n0: int | None = None, xi: float = 0.0) -> float:
    """First-layer classical covariance: x.x' / n_0 + xi^2."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise ValueError("input dimensions do not match")
    n0 = x.size if n0 is None else n0
    return float(x @ xp) / n0 + xi * xi


def projected_overlap_sum(rhos_x: np.ndarray, rhos_xp: np.ndarray, m: int) -> float:
    """sum_k (Tr(rho_x^k rho_x'^k) - 1/2^m) over the m-qubit windows."""
    overlaps = np.real(np.einsum("kab,kba->k", rhos_x, rhos_xp))
    return float(np.sum(overlaps - 1.0 / (1 << m)))


def corollary_xi(m: int, n_q: int, obs: np.ndarray | None = None) -> float:
    """Bias coefficient for which Sigma_Q^(1) is exactly the projected kernel."""
    obs = default_local_observable(m) if obs is None else obs
    tr_o2 = float(np.real(np.trace(obs @ obs)))
    return float(np.sqrt(n_q * tr_o2 / (((1 << (2 * m)) - 1) * (1 << m))))


class ProjectedQuantumKernel:
    """Sigma_Q^(1) evaluator with per-input caching of reduced states."""

    def __init__(
        self,
        spec: EncoderSpec,
        m: int,
        observable_local: np.ndarray | None = None,
        xi: float = 0.0,
    ):
        if spec.n % m != 0:
            raise ValueError(f"n={spec.n} not divisible by locality m={m}")
        self.spec = spec
        self.m = m
        self.n_q = spec.n // m
        self.obs = default_local_observable(m) if observable_local is None else observable_local
        self.xi = xi
        self.prefactor = float(np.real(np.trace(self.obs @ self.obs))) / (
            (1 << (2 * m)) - 1
        )

    def reduced_states(self, xs: np.ndarray) -> np.ndarray:
        """Window density matrices for each input, shape (N, n_Q, 2^m, 2^m)."""
        return np.stack(
            [all_reduced_densities(encoded_state(self.spec, x), self.m) for x in xs]
        )

    def __call__(self, x, xp) -> float:
        rx = all_reduced_densities(encoded_state(self.spec, np.asarray(x)), self.m)
        rxp = all_reduced_densities(encoded_state(self.spec, np.asarray(xp)), self.m)
        return self.prefactor * projected_overlap_sum(rx, rxp, self.m) + self.xi**2

    def gram(self, xs: np.ndarray, xs2: np.ndarray | None = None) -> KernelMatrix:
        rhos = self.reduced_states(np.asarray(xs))
        rhos2 = rhos if xs2 is None else self.reduced_states(np.asarray(xs2))
        overlaps = np.real(np.einsum("akij,bkji->ab", rhos, rhos2))
        entries = self.prefactor * (overlaps - self.n_q / (1 << self.m)) + self.xi**2
        return KernelMatrix(
            entries=entries,
            kind="SigmaQ",
            meta={"m": self.m, "xi": self.xi, "encoder": self.spec.digest()},
        )


def sigma_q_1(
    x,
    xp,
    spec: EncoderSpec,
    m: int,
    observable_local: np.ndarray | None = None,
    xi: float = 0.0,
) -> float:
    """First-layer quantum covariance (projected-kernel form)."""
    return ProjectedQuantumKernel(spec, m, observable_local, xi)(x, xp)


# ---------------------------------------------------------------------------
# activation recursion


def _relu_angle(k_xx, k_xy, k_yy):
    denom = np.sqrt(k_xx * k_yy)
    return np.arccos(np.clip(k_xy / denom, -1.0, 1.0))


def relu_next_sigma(k_xx: float, k_xy: float, k_yy: float, xi: float = 0.0) -> float:
    """Arc-cosine kernel step: E[ReLU(h)ReLU(h')] + xi^2 under a 2x2 Gaussian."""
    if k_xx <= 0 or k_yy <= 0:
        raise ValueError("diagonal covariance entries must be positive")
    if abs(k_xy) > np.sqrt(k_xx * k_yy) * (1 + 1e-10):
        raise ValueError("off-diagonal entry violates Cauchy-Schwarz")
    theta = _relu_angle(k_xx, k_xy, k_yy)
    return float(
        np.sqrt(k_xx * k_yy) / (2 * np.pi) * (np.sin(theta) + (np.pi - theta) * np.cos(theta))
        + xi * xi
    )


def relu_sigma_dot(k_xx: float, k_xy: float, k_yy: float) -> float:
    """E[1_{h>0} 1_{h'>0}] = (pi - theta) / (2*pi)."""
    if k_xx <= 0 or k_yy <= 0:
        raise ValueError("diagonal covariance entries must be positive")
    theta = _relu_angle(k_xx, k_xy, k_yy)
    return float((np.pi - theta) / (2 * np.pi))


def mc_gaussian_expectation(
    cov: np.ndarray,
    g,
    samples: int = 10**6,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Monte-Carlo E[g(h, h')] under a centered 2x2 Gaussian.

    Returns (estimate, standard error). Used for activations without a
    closed-form recursion (e.g. sigmoid).
    """
    cov = np.asarray(cov, dtype=float)
    eig = np.linalg.eigvalsh(cov)
    if eig[0] < -1e-10 * max(eig[-1], 1.0):
        raise ValueError("covariance must be positive semi-definite")
    rng = np.random.default_rng(0) if rng is None else rng
    chol_cov = cov + np.eye(2) * max(0.0, -eig[0] + 1e-15)
    ch = np.linalg.cholesky(chol_cov)
    z = rng.standard_normal((samples, 2)) @ ch.T
    vals = g(z[:, 0], z[:, 1])
    return float(np.mean(vals)), float(np.std(vals) / np.sqrt(samples))


def _relu_layer(gram, diag_r, diag_c, xi):
    """Elementwise arc-cosine step on a (rect) Gram block."""
    norm = np.sqrt(np.outer(diag_r, diag_c))
    theta = np.arccos(np.clip(gram / norm, -1.0, 1.0))
    sigma = norm / (2 * np.pi) * (np.sin(theta) + (np.pi - theta) * np.cos(theta)) + xi**2
    sigma_dot = (np.pi - theta) / (2 * np.pi)
    return sigma, sigma_dot


def _activation_layer(gram, diag_r, diag_c, xi, activation, mc_samples, rng):
    if activation == "relu":
        return _relu_layer(gram, diag_r, diag_c, xi)
    if activation == "identity":
        return gram + xi**2, np.ones_like(gram)
    if activation == "sigmoid":
        sig = lambda q: 1.0 / (1.0 + np.exp(-q))
        dsig = lambda q: sig(q) * (1.0 - sig(q))
        sigma = np.empty_like(gram)
        sigma_dot = np.empty_like(gram)
        for i in range(gram.shape[0]):
            for j in range(gram.shape[1]):
                cov = np.array([[diag_r[i], gram[i, j]], [gram[i, j], diag_c[j]]])
                sub = np.random.default_rng(rng.integers(2**63))
                est, _ = mc_gaussian_expectation(
                    cov, lambda a, b: sig(a) * sig(b), mc_samples, sub
                )
                sigma[i, j] = est + xi**2
                est_d, _ = mc_gaussian_expectation(
                    cov, lambda a, b: dsig(a) * dsig(b), mc_samples, sub
                )
                sigma_dot[i, j] = est_d
        return sigma, sigma_dot
    raise ValueError(f"unknown activation {activation!r}")


@dataclass
class KernelConfig:
    layers: int  # L
    xi: float = 0.0
    activation: str = "relu"
    mc_samples: int = 10**6
    mc_seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layer count must be >= 1")
        if self.xi < 0:
            raise ValueError("xi must be non-negative")


def theta_recursion(
    config: KernelConfig,
    sigma1: np.ndarray,
    diag_r: np.ndarray | None = None,
    diag_c: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(Theta^(L), Sigma^(L)) from the first-layer covariance block.

    `sigma1` may be a rectangular cross block; then `diag_r`/`diag_c` carry
    the self-covariances Sigma^(1)(x, x) of the row and column points.
    """
    if isinstance(sigma1, KernelMatrix):
        sigma1 = sigma1.entries
    sigma1 = np.asarray(sigma1, dtype=float)
    if diag_r is None:
        diag_r = np.diag(sigma1).copy()
    if diag_c is None:
        diag_c = np.diag(sigma1).copy()
    rng = np.random.default_rng(config.mc_seed)
    theta = sigma1.copy()
    sigma = sigma1.copy()
    dr, dc = np.asarray(diag_r, float).copy(), np.asarray(diag_c, float).copy()
    for _ in range(1, config.layers):
        sigma_next, sigma_dot = _activation_layer(
            sigma, dr, dc, config.xi, config.activation, config.mc_samples, rng
        )
        dr = _diag_step(dr, config)
        dc = _diag_step(dc, config)
        theta = theta * sigma_dot + sigma_next
        sigma = sigma_next
    return theta, sigma


def _diag_step(diag: np.ndarray, config: KernelConfig) -> np.ndarray:
    """Advance self-covariances one layer (theta = 0 on the diagonal)."""
    if config.activation == "relu":
        return diag / 2.0 + config.xi**2
    if config.activation == "identity":
        return diag + config.xi**2
    if config.activation == "sigmoid":
        rng = np.random.default_rng(config.mc_seed + 1)
        sig = lambda q: 1.0 / (1.0 + np.exp(-q))
        out = np.empty_like(diag)
        for i, d in enumerate(diag):
            cov = np.array([[d, d], [d, d]])
            est, _ = mc_gaussian_expectation(
                cov, lambda a, b: sig(a) * sig(b), config.mc_samples, rng
            )
            out[i] = est + config.xi**2
        return out
    raise ValueError(f"unknown activation {config.activation!r}")


def ntk_gram(
    config: KernelConfig,
    sigma1: KernelMatrix | np.ndarray,
    kind: str = "Theta",
) -> KernelMatrix:
    """Square L-layer tangent-kernel Gram from a first-layer Gram."""
    entries = sigma1.entries if isinstance(sigma1, KernelMatrix) else np.asarray(sigma1)
    theta, _ = theta_recursion(config, entries)
    meta = {"L": config.layers, "xi": config.xi, "activation": config.activation}
    if isinstance(sigma1, KernelMatrix):
        meta.update(sigma1.meta)
    return KernelMatrix(entries=theta, kind=kind, meta=meta)


# ---------------------------------------------------------------------------
# Gram assembly / diagnostics


def gram(xs, kernel_fn, kind: str = "Empirical") -> KernelMatrix:
    """Symmetric Gram matrix of pairwise kernel values (upper triangle)."""
    xs = list(xs)
    n = len(xs)
    if n == 0:
        raise ValueError("dataset must be non-empty")
    entries = np.zeros((n, n))
    for a in range(n):
        for b in range(a, n):
            try:
                entries[a, b] = kernel_fn(xs[a], xs[b])
            except Exception as exc:
                raise RuntimeError(f"kernel evaluation failed at pair ({a}, {b})") from exc
            entries[b, a] = entries[a, b]
    return KernelMatrix(entries=entries, kind=kind)


def empirical_ntk(network, xs: np.ndarray) -> KernelMatrix:
    """Gram of per-sample output gradients: sum_p df/dtheta_p df'/dtheta_p."""
    from .nn import gradient_matrix

    grads = gradient_matrix(network, np.asarray(xs, dtype=float))
    return KernelMatrix(entries=grads @ grads.T, kind="Empirical")


def pd_check(
    kernel: KernelMatrix | np.ndarray,
    reduced_states: np.ndarray | None = None,
    xi: float | None = None,
    tol: float = PD_TOL,
) -> PDReport:
    """Positive-definiteness report with a degeneracy-condition witness.

    When `reduced_states` (N, n_Q, d, d) is given, a near-null eigenvector c
    is tested against the two known degeneracy mechanisms: (i) sum_a c_a = 0
    with linearly dependent window states, (ii) xi = 0 with the c-mixture
    equal to the maximally mixed state.
    """
    entries = kernel.entries if isinstance(kernel, KernelMatrix) else np.asarray(kernel)
    eigvals, eigvecs = np.linalg.eigh(entries)
    lam_min = float(eigvals[0])
    lam_max = float(eigvals[-1])
    is_pd = lam_min > tol * max(lam_max, 0.0)
    if is_pd:
        return PDReport(lam_min, lam_max, True)
    null_mask = eigvals <= tol * max(lam_max, 0.0)
    null_basis = eigvecs[:, null_mask]
    witness = eigvecs[:, 0]
    condition = None
    if reduced_states is not None:
        # Prefer a sum-zero combination of near-null directions: within a
        # degenerate null space the raw eigenvectors are arbitrary mixtures.
        sums = null_basis.sum(axis=0)
        if np.linalg.norm(sums) < 1e-8:
            cand = null_basis[:, 0]
        else:
            proj = null_basis @ sums / (sums @ sums)
            resid = null_basis - np.outer(proj, sums)
            norms = np.linalg.norm(resid, axis=0)
            cand = resid[:, np.argmax(norms)] if norms.max() > 1e-8 else None
        if cand is not None:
            cand = cand / np.linalg.norm(cand)
            mixture = np.einsum("a,akij->kij", cand, reduced_states)
            if np.max(np.abs(mixture)) < 1e-6:
                condition, witness = "i", cand
        if condition is None and xi == 0.0:
            for j in range(null_basis.shape[1]):
                c = null_basis[:, j]
                c_sum = float(np.sum(c))
                if abs(c_sum) <= 1e-12:
                    continue
                mixture = np.einsum("a,akij->kij", c, reduced_states)
                scaled = mixture / c_sum
                d = scaled.shape[-1]
                if np.max(np.abs(scaled - np.eye(d) / d)) < 1e-6:
                    condition, witness = "ii", c
                    break
    return PDReport(lam_min, lam_max, False, degeneracy_witness=witness, condition=condition)
