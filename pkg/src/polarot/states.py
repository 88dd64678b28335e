"""One- and two-qubit polarization states in the H/V basis.

Conventions fixed here and used everywhere else:

* single-photon basis order (|H>, |V>); |R> = (|H> - i|V>)/sqrt(2),
  |L> = (|H> + i|V>)/sqrt(2), |D> = (|H> + |V>)/sqrt(2), |A> = (|H> - |V>)/sqrt(2)
* two-photon basis order (HH, HV, VH, VV); the first tensor factor is arm A
* all angles in radians inside the library; degrees only at I/O boundaries
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "KET_H", "KET_V", "KET_D", "KET_A", "KET_R", "KET_L",
    "PAULI_X", "PAULI_Y", "PAULI_Z", "ID2", "PAULIS",
    "BELL_KINDS", "ket", "ket_to_dm", "bell_ket", "bell_state",
    "separable_state", "werner_state", "maximally_mixed",
    "validate_ket", "validate_state",
    "fidelity", "concurrence", "cosine_similarity", "purity",
    "save_state", "load_state",
]

KET_H = np.array([1.0, 0.0], dtype=complex)
KET_V = np.array([0.0, 1.0], dtype=complex)
KET_D = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
KET_A = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
KET_R = np.array([1.0, -1.0j], dtype=complex) / np.sqrt(2.0)
KET_L = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)

_KETS = {"H": KET_H, "V": KET_V, "D": KET_D, "A": KET_A, "R": KET_R, "L": KET_L}

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
ID2 = np.eye(2, dtype=complex)
PAULIS = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z, "i": ID2}

BELL_KINDS = ("psi_plus", "psi_minus", "phi_plus", "phi_minus")


def ket(label: str) -> np.ndarray:
    """Single-photon ket by polarization label (one of H, V, D, A, R, L)."""
    try:
        return _KETS[label.upper()].copy()
    except KeyError:
        raise ValueError(f"unknown polarization label {label!r}; expected one of "
                         f"{sorted(_KETS)}") from None


def validate_ket(psi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2,):
        raise ValueError(f"single-photon ket must have shape (2,), got {psi.shape}")
    norm2 = float(np.vdot(psi, psi).real)
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"ket not normalized: |psi|^2 = {norm2!r}")
    return psi


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    """Outer product |psi><psi| of a (multi-photon) ket."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def bell_ket(kind: str) -> np.ndarray:
    """State vector of one of the four maximally entangled two-photon states."""
    s = 1.0 / np.sqrt(2.0)
    if kind == "psi_plus":
        return np.array([0, s, s, 0], dtype=complex)
    if kind == "psi_minus":
        return np.array([0, s, -s, 0], dtype=complex)
    if kind == "phi_plus":
        return np.array([s, 0, 0, s], dtype=complex)
    if kind == "phi_minus":
        return np.array([s, 0, 0, -s], dtype=complex)
    raise ValueError(f"unknown Bell-state kind {kind!r}; expected one of {BELL_KINDS}")


def bell_state(kind: str) -> np.ndarray:
    """Density matrix of a Bell state."""
    return ket_to_dm(bell_ket(kind))


def separable_state(ket_a: np.ndarray, ket_b: np.ndarray) -> np.ndarray:
    """Product-state density matrix |a><a| (x) |b><b|."""
    ket_a = validate_ket(ket_a)
    ket_b = validate_ket(ket_b)
    return ket_to_dm(np.kron(ket_a, ket_b))


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4.0


def werner_state(p: float, kind: str = "psi_plus") -> np.ndarray:
    """Mixture p * (Bell state) + (1 - p) * I/4."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing weight must be in [0, 1], got {p}")
    return p * bell_state(kind) + (1.0 - p) * maximally_mixed()


def validate_state(rho: np.ndarray, herm_tol: float = 1e-10,
                   trace_tol: float = 1e-10, psd_tol: float = 1e-9) -> np.ndarray:
    """Check the physicality invariants of a two-photon density matrix.

    Returns the input as a complex array; raises ValueError when it is not
    Hermitian / unit-trace / positive semidefinite within the tolerances.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"density matrix must have shape (4, 4), got {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian: max |rho - rho^dag| = {herm:g}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    lo = float(np.linalg.eigvalsh(rho).min())
    if lo < -psd_tol:
        raise ValueError(f"density matrix not positive semidefinite: min eigenvalue = {lo:g}")
    return rho


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    # Eigenvalues slightly below zero come from round-off on the PSD boundary
    # (typical of reconstructed states); clamp them to zero.
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, in [0, 1]."""
    rho = validate_state(rho)
    sigma = validate_state(sigma)
    sq = _sqrtm_psd(rho)
    ev = np.linalg.eigvalsh(sq @ sigma @ sq)
    f = float(np.sqrt(np.clip(ev, 0.0, None)).sum() ** 2)
    return min(f, 1.0)


def concurrence(rho: np.ndarray) -> float:
    """Two-qubit concurrence: max(0, l1 - l2 - l3 - l4).

    The l_i are the decreasingly ordered square roots of the eigenvalues of
    rho (sy (x) sy) rho* (sy (x) sy).
    """
    rho = validate_state(rho)
    yy = np.kron(PAULI_Y, PAULI_Y)
    m = rho @ yy @ rho.conj() @ yy
    ev = np.linalg.eigvals(m).real
    lam = np.sqrt(np.clip(ev, 0.0, None))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


def cosine_similarity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Re Tr(rho^dag sigma) / (||rho||_F ||sigma||_F)."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    nr = np.linalg.norm(rho)
    ns = np.linalg.norm(sigma)
    if nr == 0.0 or ns == 0.0:
        raise ValueError("cosine similarity undefined for a zero matrix")
    return float(np.trace(rho.conj().T @ sigma).real / (nr * ns))


def purity(rho: np.ndarray) -> float:
    """Tr rho^2; 1 for pure states, 1/4 for the maximally mixed state."""
    rho = validate_state(rho)
    return float(np.trace(rho @ rho).real)


def save_state(path, rho: np.ndarray) -> None:
    """Write a 4x4 complex matrix as 16 'real imag' rows in (HH, HV, VH, VV)
    row-major order."""
    rho = np.asarray(rho, dtype=complex)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# two-photon density matrix, row-major (HH, HV, VH, VV)\n")
        fh.write("# columns: real imag\n")
        for z in rho.ravel():
            fh.write(f"{z.real:.17g} {z.imag:.17g}\n")


def load_state(path) -> np.ndarray:
    """Read a matrix written by save_state."""
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            re_s, im_s = line.split()
            entries.append(complex(float(re_s), float(im_s)))
    if len(entries) != 16:
        raise ValueError(f"expected 16 matrix entries, found {len(entries)}")
    return np.array(entries, dtype=complex).reshape(4, 4)
