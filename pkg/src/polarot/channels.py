"""Local polarization transformations: optical rotations, wave plates,
molarity-calibrated solutions, analyzer offsets, and isotropic noise.

Sign convention: levorotation is a positive angle and rotates the
polarization plane from H toward V, i.e. U(theta)|H> = cos(theta)|H> +
sin(theta)|V>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import maximally_mixed, validate_state

__all__ = [
    "rotation_unitary", "hwp_matrix", "qwp_matrix", "apply_local",
    "RotationChannel", "SolutionSpec", "NoiseSpec",
    "solution_rotation", "offset_correct", "apply_noise",
]


def rotation_unitary(theta: float) -> np.ndarray:
    """Polarization-plane rotation by theta (radians):
    [[cos, -sin], [sin, cos]]."""
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta!r}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hwp_matrix(angle: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at `angle` radians."""
    c, s = math.cos(2.0 * angle), math.sin(2.0 * angle)
    return np.array([[c, s], [s, -c]], dtype=complex)


def qwp_matrix(angle: float) -> np.ndarray:
    """Jones matrix of a quarter-wave plate with fast axis at `angle` radians."""
    rot = rotation_unitary(angle)
    return rot @ np.diag([1.0, -1.0j]) @ rot.conj().T


def _check_unitary(u: np.ndarray, tol: float, name: str) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix, got shape {u.shape}")
    dev = np.abs(u.conj().T @ u - np.eye(2)).max()
    if dev > tol:
        raise ValueError(f"{name} is not unitary: max |U^dag U - I| = {dev:g}")
    return u


def apply_local(rho: np.ndarray, u_a: np.ndarray, u_b: np.ndarray,
                unitary_tol: float = 1e-8) -> np.ndarray:
    """Evolve a two-photon state by independent single-photon unitaries,
    (u_a (x) u_b) rho (u_a (x) u_b)^dag."""
    rho = validate_state(rho)
    u_a = _check_unitary(u_a, unitary_tol, "u_a")
    u_b = _check_unitary(u_b, unitary_tol, "u_b")
    u = np.kron(u_a, u_b)
    return u @ rho @ u.conj().T


@dataclass(frozen=True)
class RotationChannel:
    """A local optical rotation by `theta` radians (levorotation > 0)."""

    theta: float

    @property
    def matrix(self) -> np.ndarray:
        return rotation_unitary(self.theta)

    def compose(self, other: "RotationChannel") -> "RotationChannel":
        return RotationChannel(self.theta + other.theta)


@dataclass(frozen=True)
class SolutionSpec:
    """A chiral solution characterized by a linear molarity-to-rotation
    calibration.

    slope_deg_per_molar and pbs_offset_deg are in degrees (I/O units);
    the physical rotation angle is returned in radians by
    solution_rotation. The PBS offset is an analyzer artifact and is never
    part of the physical rotation; it is corrected separately by
    offset_correct. Transmission is polarization-independent and scales
    detection rates only.
    """

    molarity: float
    slope_deg_per_molar: float
    pbs_offset_deg: float = 0.0
    transmission: float = 1.0

    def __post_init__(self):
        if self.molarity < 0.0:
            raise ValueError(f"molarity must be nonnegative, got {self.molarity}")
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission must be in [0, 1], got {self.transmission}")


def solution_rotation(spec: SolutionSpec) -> float:
    """Physical rotation angle (radians) induced by the solution:
    radians(slope * molarity)."""
    theta_deg = spec.slope_deg_per_molar * spec.molarity
    if not math.isfinite(theta_deg):
        raise ValueError(f"solution rotation is not finite: {theta_deg!r}")
    return math.radians(theta_deg)


def offset_correct(theta_exp: float, which: str, pbs_a: float, pbs_b: float,
                   hwp: float) -> float:
    """Remove analyzer offsets from a measured rotation angle.

    For the addition branch ('plus') the corrected angle is
    theta_exp - pbs_a - pbs_b; for the cancellation branch ('minus') it is
    theta_exp - pbs_a + pbs_b - hwp, because the state-exchanging
    half-wave plate is only inserted in minus-branch runs. All angles in
    radians.
    """
    if which == "plus":
        return theta_exp - pbs_a - pbs_b
    if which == "minus":
        return theta_exp - pbs_a + pbs_b - hwp
    raise ValueError(f"branch must be 'plus' or 'minus', got {which!r}")


@dataclass(frozen=True)
class NoiseSpec:
    """Phenomenological imperfection model: isotropic (Werner) mixing with
    weight `visibility` toward the ideal state, plus a fraction of
    accidental coincidences spread uniformly over outcomes at sampling
    time."""

    visibility: float = 1.0
    accidental_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")
        if not 0.0 <= self.accidental_fraction < 1.0:
            raise ValueError(
                f"accidental_fraction must be in [0, 1), got {self.accidental_fraction}")


def apply_noise(rho: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    """Mix the state with the maximally mixed one:
    p * rho + (1 - p) * I/4."""
    rho = validate_state(rho)
    p = noise.visibility
    return p * rho + (1.0 - p) * maximally_mixed()
