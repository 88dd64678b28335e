"""Two-photon state tomography from 16 joint projection counts.

The canonical basis set pairs arm-A labels {H, V, R, D} with arm-B labels
{H, V, D, L} (for A in {H, V, R}) or {H, V, D, R} (for A = D). Counts are
modeled as independent Poisson variables with a single unknown flux
normalization; reconstruction either inverts the linear system directly
(fast, possibly unphysical) or maximizes the Poisson likelihood over a
Cholesky-style factorization that is physical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .states import (concurrence, cosine_similarity, fidelity, ket, purity,
                     validate_state)

__all__ = [
    "TomographyBasisSet", "MleResult", "tomography_settings",
    "predicted_counts", "linear_inversion", "mle_reconstruct",
    "reconstruction_report", "bootstrap_sigmas",
    "write_tomo_counts", "read_tomo_counts",
]

_GAMMA = ("H", "V", "D", "L")
_DELTA = ("H", "V", "D", "R")
BASIS_LABELS = tuple([("H", g) for g in _GAMMA] + [("V", g) for g in _GAMMA]
                     + [("R", g) for g in _GAMMA] + [("D", d) for d in _DELTA])

# T is lower triangular: 4 real diagonal entries, then (re, im) pairs for
# the off-diagonal entries in this order.
_OFFDIAG = ((1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2))


@dataclass(frozen=True, eq=False)
class TomographyBasisSet:
    """The 16 joint projection kets, row k projecting on |labels[k][0]>_A
    |labels[k][1]>_B. The 16x16 design matrix (rows = conjugated vectorized
    projectors) has rank 16 and condition number 9.75, so the set is
    informationally complete."""

    labels: tuple
    kets: np.ndarray

    def design_matrix(self) -> np.ndarray:
        return np.array([np.outer(k, k.conj()).conj().ravel() for k in self.kets])


def tomography_settings() -> TomographyBasisSet:
    """The canonical 16-basis set in its frozen order."""
    kets = np.array([np.kron(ket(a), ket(b)) for a, b in BASIS_LABELS])
    return TomographyBasisSet(BASIS_LABELS, kets)


_CANONICAL = tomography_settings()


def _basis_or_default(basis) -> TomographyBasisSet:
    return _CANONICAL if basis is None else basis


def predicted_counts(rho: np.ndarray, basis: TomographyBasisSet | None = None,
                     flux_norm: float = 1.0) -> np.ndarray:
    """Expected counts flux_norm * <psi_k| rho |psi_k> per basis."""
    basis = _basis_or_default(basis)
    if flux_norm <= 0:
        raise ValueError(f"flux_norm must be positive, got {flux_norm}")
    rho = validate_state(rho)
    p = np.einsum("ki,ij,kj->k", basis.kets.conj(), rho, basis.kets).real
    return flux_norm * np.clip(p, 0.0, None)


def linear_inversion(counts: np.ndarray,
                     basis: TomographyBasisSet | None = None) -> np.ndarray:
    """Solve the 16x16 linear system for the state, symmetrized and trace
    normalized. The result is Hermitian with unit trace but can have
    negative eigenvalues for noisy counts."""
    basis = _basis_or_default(basis)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (16,):
        raise ValueError(f"expected 16 counts, got shape {counts.shape}")
    if not np.isfinite(counts).all() or counts.sum() <= 0:
        raise ValueError("counts must be finite with a positive total")
    design = basis.design_matrix()
    if np.linalg.matrix_rank(design) < 16:
        raise ValueError("tomography basis set is not informationally complete")
    rho = np.linalg.solve(design, counts).reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _t_to_matrix(t: np.ndarray) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    m[np.diag_indices(4)] = t[:4]
    for i, (r, c) in enumerate(_OFFDIAG):
        m[r, c] = t[4 + 2 * i] + 1j * t[5 + 2 * i]
    return m


def _matrix_to_t(m: np.ndarray) -> np.ndarray:
    t = np.empty(16)
    t[:4] = m.diagonal().real
    for i, (r, c) in enumerate(_OFFDIAG):
        t[4 + 2 * i] = m[r, c].real
        t[5 + 2 * i] = m[r, c].imag
    return t


def _rho_from_t(t: np.ndarray) -> np.ndarray:
    m = _t_to_matrix(t)
    rho = m.conj().T @ m
    return rho / np.trace(rho).real


def _initial_t(counts: np.ndarray, basis: TomographyBasisSet,
               param_floor: float) -> np.ndarray:
    rho0 = linear_inversion(counts, basis)
    w, v = np.linalg.eigh(rho0)
    w = np.maximum(w, param_floor)
    rho0 = (v * w) @ v.conj().T
    rho0 /= np.trace(rho0).real
    # lower-triangular factor with rho = T^dag T, via the anti-diagonal
    # permutation of the ordinary Cholesky factor
    p = np.eye(4)[::-1]
    lower = np.linalg.cholesky(p @ rho0 @ p)
    return _matrix_to_t((p @ lower @ p).conj().T)


def _negloglike_and_grad(t, counts, kets):
    # mean Poisson log-likelihood per detected count, flux profiled out:
    # f = sum(n_k ln q_k)/N - ln(sum q_k), with q_k = ||T psi_k||^2
    m = _t_to_matrix(t)
    tp = kets @ m.T
    q = np.maximum(np.einsum("ij,ij->i", tp.conj(), tp).real, 1e-300)
    total = counts.sum()
    qsum = q.sum()
    f = (counts @ np.log(q)) / total - np.log(qsum)
    w = (counts / total) / q - 1.0 / qsum
    outer = tp.conj()[:, :, None] * kets[:, None, :]
    dq = np.empty((len(counts), 16))
    dq[:, 0:4] = 2.0 * outer[:, range(4), range(4)].real
    for i, (r, c) in enumerate(_OFFDIAG):
        dq[:, 4 + 2 * i] = 2.0 * outer[:, r, c].real
        dq[:, 5 + 2 * i] = -2.0 * outer[:, r, c].imag
    grad = w @ dq
    return -f, -grad


@dataclass
class MleResult:
    rho: np.ndarray
    log_likelihood: float
    converged: bool
    n_iter: int
    grad_max: float
    loglik_trace: np.ndarray


def mle_reconstruct(counts: np.ndarray, basis: TomographyBasisSet | None = None,
                    max_iter: int = 5000, grad_tol: float = 1e-8,
                    param_floor: float = 1e-6) -> MleResult:
    """Maximum-likelihood state reconstruction from 16 projection counts.

    Maximizes the Poisson log-likelihood sum_k [n_k ln nbar_k - nbar_k]
    over the 16 real factorization parameters, with the flux normalization
    profiled out analytically (flux = sum n_k / sum q_k at every iterate).
    BFGS with the analytic gradient runs on the per-count mean
    log-likelihood, so grad_tol is count-scale independent; `converged` is
    true iff the final gradient max-norm is at or below grad_tol. The
    returned state is physical by construction for any parameter values.
    The reported log-likelihood is the unnormalized Poisson form above
    (factorial terms dropped).
    """
    basis = _basis_or_default(basis)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (16,):
        raise ValueError(f"expected 16 counts, got shape {counts.shape}")
    if (counts < 0).any():
        raise ValueError("counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("total counts must be positive")
    t = _initial_t(counts, basis, param_floor)
    trace = [-_negloglike_and_grad(t, counts, basis.kets)[0]]
    n_iter = 0
    # BFGS runs against a tighter internal tolerance and is restarted with a
    # fresh Hessian when it stalls on line-search precision loss; near the
    # optimum the objective varies at machine precision, so a single pass
    # lands slightly above grad_tol in a few percent of noisy problems
    for _ in range(3):
        res = optimize.minimize(
            _negloglike_and_grad, t, args=(counts, basis.kets), jac=True,
            method="BFGS",
            options={"gtol": 1e-2 * grad_tol, "maxiter": max_iter - n_iter},
            callback=lambda tk: trace.append(
                -_negloglike_and_grad(tk, counts, basis.kets)[0]),
        )
        t = res.x
        n_iter += int(res.nit)
        grad_max = float(np.abs(res.jac).max())
        if grad_max <= grad_tol or n_iter >= max_iter:
            break
    rho = _rho_from_t(t)
    nbar = predicted_counts(rho, basis, flux_norm=1.0)
    flux = total / nbar.sum()
    nbar = np.maximum(flux * nbar, 1e-300)
    loglik = float(counts @ np.log(nbar) - nbar.sum())
    return MleResult(rho=rho, log_likelihood=loglik,
                     converged=bool(grad_max <= grad_tol),
                     n_iter=n_iter, grad_max=grad_max,
                     loglik_trace=np.asarray(trace))


def reconstruction_report(rho_hat: np.ndarray, reference: np.ndarray) -> dict:
    """Bundle the four comparison metrics of a reconstructed state."""
    return {
        "fidelity": fidelity(rho_hat, reference),
        "concurrence": concurrence(rho_hat),
        "purity": purity(rho_hat),
        "cosine_similarity": cosine_similarity(rho_hat, reference),
    }


def bootstrap_sigmas(rho_hat: np.ndarray, counts: np.ndarray,
                     reference: np.ndarray,
                     basis: TomographyBasisSet | None = None,
                     n_resamples: int = 200, seed: int = 0) -> dict:
    """Parametric-bootstrap standard deviations of the report metrics.

    Resamples Poisson counts from the fitted model (flux matched to the
    observed total), reconstructs each resample, and returns the spread of
    every metric. Resample r uses the independent stream (seed, r), so the
    result does not depend on evaluation order.
    """
    basis = _basis_or_default(basis)
    counts = np.asarray(counts, dtype=float)
    p = predicted_counts(rho_hat, basis, flux_norm=1.0)
    nbar = counts.sum() / p.sum() * p
    samples = {key: [] for key in ("fidelity", "concurrence", "purity",
                                   "cosine_similarity")}
    for r in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        resampled = rng.poisson(nbar).astype(float)
        rho_r = mle_reconstruct(resampled, basis).rho
        for key, value in reconstruction_report(rho_r, reference).items():
            samples[key].append(value)
    return {key: float(np.std(vals, ddof=1)) for key, vals in samples.items()}


def write_tomo_counts(path, counts: np.ndarray, metadata: dict | None = None) -> None:
    """Write 16 basis counts as 'label_a,label_b,count' rows in the frozen
    basis order, '#'-prefixed key=value metadata first."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (16,):
        raise ValueError(f"expected 16 counts, got shape {counts.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(metadata or {}):
            fh.write(f"# {key}={metadata[key]}\n")
        fh.write("basis_label_a,basis_label_b,count\n")
        for (a, b), n in zip(BASIS_LABELS, counts):
            fh.write(f"{a},{b},{n:.17g}\n")


def read_tomo_counts(path) -> tuple[np.ndarray, dict]:
    """Read a tomography counts file; rows may appear in any order but
    every canonical basis pair must occur exactly once."""
    metadata = {}
    seen = {}
    header_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            if not header_seen:
                if line.replace(" ", "") != "basis_label_a,basis_label_b,count":
                    raise ValueError(f"bad tomography header: {line!r}")
                header_seen = True
                continue
            a, b, n = line.split(",")
            pair = (a.strip().upper(), b.strip().upper())
            if pair in seen:
                raise ValueError(f"duplicate basis row {pair}")
            seen[pair] = float(n)
    missing = [pair for pair in BASIS_LABELS if pair not in seen]
    if missing:
        raise ValueError(f"tomography file is missing basis rows: {missing}")
    return np.array([seen[pair] for pair in BASIS_LABELS]), metadata
