"""Projective polarization measurements and coincidence statistics.

Covers analyzer settings (named bases, rotated linear polarizers, wave-plate
stacks), Born-rule outcome probabilities, seeded Monte Carlo coincidence
sampling, correlation estimators, extraction of the local rotation angles
from joint observables, the wide-range scan, and the CHSH statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import hwp_matrix, qwp_matrix, rotation_unitary
from .states import ID2, PAULI_X, PAULI_Z, ket_to_dm, validate_state

__all__ = [
    "AnalyzerSetting", "JointObservables", "CoincidenceTable",
    "outcome_probabilities", "joint_expectation", "exact_observables",
    "separable_expectations", "simulate_counts", "exact_table",
    "estimate_correlation", "estimate_observables",
    "rotation_from_observables", "extract_thetas", "scan_theta_a",
    "chsh_s", "chsh_from_counts", "write_table", "read_table",
]


@dataclass(frozen=True, eq=False)
class AnalyzerSetting:
    """One local analyzer: an orthogonal projector pair with outcomes +1/-1.

    `setting_id` is the canonical string form used in coincidence files:
    'Z', 'X', 'Y' for the named bases, 'lin:<deg>' for a linear polarizer
    rotated by <deg>, and 'wp:<hwp deg>:<qwp deg>' for a half- plus
    quarter-wave plate in front of a polarizing beam splitter.
    """

    plus_ket: np.ndarray
    minus_ket: np.ndarray
    setting_id: str

    def __post_init__(self):
        comp = np.abs(ket_to_dm(self.plus_ket) + ket_to_dm(self.minus_ket) - ID2).max()
        if comp > 1e-12:
            raise ValueError(f"analyzer projectors do not resolve the identity "
                             f"(deviation {comp:g})")

    @classmethod
    def from_basis(cls, name: str) -> "AnalyzerSetting":
        """Named basis: Z is H/V, X is D/A, Y is L/R (+1 outcome first)."""
        name = name.upper()
        if name == "Z":
            plus = np.array([1.0, 0.0], dtype=complex)
        elif name == "X":
            plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
        elif name == "Y":
            plus = np.array([1.0, 1.0j], dtype=complex) / np.sqrt(2.0)
        else:
            raise ValueError(f"unknown basis {name!r}; expected Z, X or Y")
        minus = np.array([-plus[1].conjugate(), plus[0].conjugate()], dtype=complex)
        return cls(plus, minus, name)

    @classmethod
    def from_polarizer(cls, angle: float) -> "AnalyzerSetting":
        """Linear analyzer rotated by `angle` radians; +1 transmits
        cos(angle)|H> + sin(angle)|V>, -1 the orthogonal port."""
        plus = rotation_unitary(angle) @ np.array([1.0, 0.0], dtype=complex)
        minus = rotation_unitary(angle + math.pi / 2.0) @ np.array([1.0, 0.0], dtype=complex)
        return cls(plus, minus, f"lin:{math.degrees(angle):.6f}")

    @classmethod
    def from_waveplates(cls, hwp_angle: float, qwp_angle: float) -> "AnalyzerSetting":
        """Half-wave plate at hwp_angle then quarter-wave plate at qwp_angle
        (radians) in front of a PBS; +1 is the transmitted (H) port."""
        w = qwp_matrix(qwp_angle) @ hwp_matrix(hwp_angle)
        plus = w.conj().T @ np.array([1.0, 0.0], dtype=complex)
        minus = w.conj().T @ np.array([0.0, 1.0], dtype=complex)
        sid = f"wp:{math.degrees(hwp_angle):.6f}:{math.degrees(qwp_angle):.6f}"
        return cls(plus, minus, sid)

    @classmethod
    def from_id(cls, setting_id: str) -> "AnalyzerSetting":
        if setting_id in ("Z", "X", "Y"):
            return cls.from_basis(setting_id)
        if setting_id.startswith("lin:"):
            return cls.from_polarizer(math.radians(float(setting_id[4:])))
        if setting_id.startswith("wp:"):
            _, h, q = setting_id.split(":")
            return cls.from_waveplates(math.radians(float(h)), math.radians(float(q)))
        raise ValueError(f"cannot parse analyzer setting id {setting_id!r}")

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        return ket_to_dm(self.plus_ket), ket_to_dm(self.minus_ket)


@dataclass(frozen=True)
class JointObservables:
    """Two-photon correlation values for the (z,z), (x,z) and (z,x)
    operator pairs, with one statistical sigma per entry (zero for exact
    Born-rule values)."""

    m_zz: float
    m_xz: float
    m_zx: float
    sigma_zz: float = 0.0
    sigma_xz: float = 0.0
    sigma_zx: float = 0.0


@dataclass
class CoincidenceTable:
    """Coincidence counts per joint analyzer setting.

    counts has one row per setting pair with the four outcome combinations
    (++, +-, -+, --). Counts are floats so that exact-expectation tables
    can store unrounded expected values; sampled tables hold integers.
    """

    settings: list[tuple[AnalyzerSetting, AnalyzerSetting]]
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.settings), 4):
            raise ValueError(f"counts must have shape ({len(self.settings)}, 4), "
                             f"got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")


def outcome_probabilities(rho: np.ndarray, a: AnalyzerSetting,
                          b: AnalyzerSetting) -> np.ndarray:
    """Born probabilities of the four coincidence outcomes (++, +-, -+, --)."""
    rho = validate_state(rho)
    pa_p, pa_m = a.projectors()
    pb_p, pb_m = b.projectors()
    probs = np.array([
        np.trace(rho @ np.kron(pa_p, pb_p)).real,
        np.trace(rho @ np.kron(pa_p, pb_m)).real,
        np.trace(rho @ np.kron(pa_m, pb_p)).real,
        np.trace(rho @ np.kron(pa_m, pb_m)).real,
    ])
    return np.clip(probs, 0.0, None)


def joint_expectation(rho: np.ndarray, op_a: np.ndarray, op_b: np.ndarray) -> float:
    """Tr[rho (op_a (x) op_b)] for single-photon operators op_a, op_b."""
    rho = validate_state(rho)
    return float(np.trace(rho @ np.kron(op_a, op_b)).real)


def exact_observables(rho: np.ndarray) -> JointObservables:
    """Born-rule joint observables of a state, with zero sigmas."""
    return JointObservables(
        m_zz=joint_expectation(rho, PAULI_Z, PAULI_Z),
        m_xz=joint_expectation(rho, PAULI_X, PAULI_Z),
        m_zx=joint_expectation(rho, PAULI_Z, PAULI_X),
    )


def separable_expectations(theta_a: float, theta_b: float) -> JointObservables:
    """Joint observables of the product state |H>|V> evolved through local
    rotations (theta_a, theta_b).

    Closed forms (Born rule): m_zz = -cos(2 theta_a) cos(2 theta_b),
    m_xz = -sin(2 theta_a) cos(2 theta_b), m_zx = -cos(2 theta_a)
    sin(2 theta_b). The swing of every entry is bounded by the other arm's
    cosine factor instead of reaching +-1, which is what separates product
    states from the entangled case.
    """
    ca, sa = math.cos(2.0 * theta_a), math.sin(2.0 * theta_a)
    cb, sb = math.cos(2.0 * theta_b), math.sin(2.0 * theta_b)
    return JointObservables(m_zz=-ca * cb, m_xz=-sa * cb, m_zx=-ca * sb)


def _effective_probabilities(rho, settings, accidental_fraction):
    rows = []
    for a, b in settings:
        p = outcome_probabilities(rho, a, b)
        p = p / p.sum()
        rows.append((1.0 - accidental_fraction) * p + accidental_fraction / 4.0)
    return np.array(rows)


def _table_metadata(pair_flux, duration, transmission_a, transmission_b,
                    accidental_fraction, **extra):
    md = {
        "pair_flux": pair_flux,
        "duration": duration,
        "transmission_a": transmission_a,
        "transmission_b": transmission_b,
        "accidental_fraction": accidental_fraction,
    }
    md.update(extra)
    return md


def _check_simulation_args(settings, pair_flux, duration, transmission_a,
                           transmission_b, accidental_fraction):
    if not settings:
        raise ValueError("settings list must not be empty")
    if pair_flux <= 0 or duration <= 0:
        raise ValueError(f"pair_flux and duration must be positive, got "
                         f"{pair_flux}, {duration}")
    for name, frac in (("transmission_a", transmission_a),
                       ("transmission_b", transmission_b)):
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {frac}")
    if not 0.0 <= accidental_fraction < 1.0:
        raise ValueError(f"accidental_fraction must be in [0, 1), "
                         f"got {accidental_fraction}")


def simulate_counts(rho: np.ndarray, settings, pair_flux: float, duration: float,
                    transmission_a: float = 1.0, transmission_b: float = 1.0,
                    accidental_fraction: float = 0.0, seed: int = 0) -> CoincidenceTable:
    """Draw a coincidence table for the given joint settings.

    Per setting, the detected-pair total is Poisson with mean
    pair_flux * duration * transmission_a * transmission_b, split
    multinomially by the Born outcome probabilities; accidental
    coincidences replace the stated fraction of the mean and are uniform
    over the four outcomes. Each setting consumes an independent random
    stream derived from (seed, setting index), so tables are reproducible
    and independent of evaluation order.
    """
    _check_simulation_args(settings, pair_flux, duration, transmission_a,
                           transmission_b, accidental_fraction)
    lam = pair_flux * duration * transmission_a * transmission_b
    probs = _effective_probabilities(rho, settings, 0.0)
    counts = np.zeros((len(settings), 4))
    for k in range(len(settings)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
        n_true = rng.poisson(lam * (1.0 - accidental_fraction))
        n_acc = rng.poisson(lam * accidental_fraction)
        counts[k] = rng.multinomial(n_true, probs[k]) + rng.multinomial(n_acc, [0.25] * 4)
    md = _table_metadata(pair_flux, duration, transmission_a, transmission_b,
                         accidental_fraction, rng_seed=seed, exact=0)
    return CoincidenceTable([tuple(s) for s in settings], counts, md)


def exact_table(rho: np.ndarray, settings, pair_flux: float, duration: float,
                transmission_a: float = 1.0, transmission_b: float = 1.0,
                accidental_fraction: float = 0.0) -> CoincidenceTable:
    """Expected-value coincidence table: the sampling-free limit of
    simulate_counts, with unrounded mean counts per outcome."""
    _check_simulation_args(settings, pair_flux, duration, transmission_a,
                           transmission_b, accidental_fraction)
    lam = pair_flux * duration * transmission_a * transmission_b
    counts = lam * _effective_probabilities(rho, settings, accidental_fraction)
    md = _table_metadata(pair_flux, duration, transmission_a, transmission_b,
                         accidental_fraction, exact=1)
    return CoincidenceTable([tuple(s) for s in settings], counts, md)


def estimate_correlation(counts: np.ndarray) -> tuple[float, float]:
    """Correlation estimate (n_pp - n_pm - n_mp + n_mm) / n_total and its
    binomial standard error sqrt((1 - m^2) / n_total)."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("cannot estimate a correlation from zero total counts")
    m = (counts[0] - counts[1] - counts[2] + counts[3]) / total
    sigma = math.sqrt(max(1.0 - m * m, 0.0) / total)
    return float(m), sigma


def _rows_for_pair(table: CoincidenceTable, id_a: str, id_b: str) -> np.ndarray:
    rows = [k for k, (a, b) in enumerate(table.settings)
            if a.setting_id == id_a and b.setting_id == id_b]
    if not rows:
        raise ValueError(f"coincidence table is missing the ({id_a}, {id_b}) "
                         f"basis pair")
    return table.counts[rows].sum(axis=0)


def estimate_observables(table: CoincidenceTable) -> JointObservables:
    """Estimate the (z,z), (x,z), (z,x) correlations from a coincidence
    table containing the named basis pairs (Z,Z), (X,Z) and (Z,X)."""
    m_zz, s_zz = estimate_correlation(_rows_for_pair(table, "Z", "Z"))
    m_xz, s_xz = estimate_correlation(_rows_for_pair(table, "X", "Z"))
    m_zx, s_zx = estimate_correlation(_rows_for_pair(table, "Z", "X"))
    return JointObservables(m_zz, m_xz, m_zx, s_zz, s_xz, s_zx)


def rotation_from_observables(m_zz: float, m_xz: float,
                              sigma_zz: float = 0.0,
                              sigma_xz: float = 0.0) -> tuple[float, float]:
    """Effective rotation angle of an evolved Bell state from its own
    joint observables: theta = atan2(-m_xz, -m_zz) / 2, in (-pi/2, pi/2],
    with the propagated standard error."""
    theta = 0.5 * math.atan2(-m_xz, -m_zz)
    r2 = m_zz * m_zz + m_xz * m_xz
    if r2 == 0.0:
        return theta, math.inf
    var = (0.5 * m_xz / r2) ** 2 * sigma_zz ** 2 + (0.5 * m_zz / r2) ** 2 * sigma_xz ** 2
    return theta, math.sqrt(var)


def extract_thetas(obs_plus: JointObservables, obs_minus: JointObservables,
                   modulus_floor: float = 1e-6) -> tuple[float, float]:
    """Recover both local rotation angles from the joint observables of the
    addition- and cancellation-branch states.

    Writing z+ = -m_zz^+ - i m_xz^+ and z-(eps) = -m_zz^- - i eps m_xz^-,
    the closed forms give z+ = exp(i 2(theta_a + theta_b)) and
    z-(+1) = exp(i 2(theta_a - theta_b)), so the products z+ z-(+1) and
    z+ z-(-1) equal exp(i 4 theta_a) and exp(i 4 theta_b). Each angle is
    -i/4 times the principal logarithm of its product, which is
    single-valued for angles within (-pi/4, pi/4]; outside that window the
    result wraps by pi/2 (use scan_theta_a first when the prior is wider).
    For noisy inputs the products drift off the unit circle; the real part
    of the logarithm only shifts the discarded imaginary component of the
    angle, so the returned values stay real estimates.
    """
    z_plus = complex(-obs_plus.m_zz, -obs_plus.m_xz)
    thetas = []
    for eps in (1.0, -1.0):
        z_minus = complex(-obs_minus.m_zz, -eps * obs_minus.m_xz)
        for name, z in (("plus", z_plus), ("minus", z_minus)):
            if abs(z) < modulus_floor:
                raise ValueError(
                    f"extraction ill-conditioned: |{name}-branch factor| = "
                    f"{abs(z):g} < {modulus_floor:g}")
        theta = -0.25j * np.log(z_plus * z_minus)
        thetas.append(float(theta.real))
    return thetas[0], thetas[1]


def _golden_section_min(func, lo: float, hi: float, tol: float,
                        max_iter: int = 200) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    return 0.5 * (a + b)


def scan_theta_a(probe, search_range: tuple[float, float], resolution: float,
                 noise_floor: float = 1e-3) -> float:
    """Locate an unknown rotation in one arm by sweeping the other arm.

    `probe` maps a trial angle theta_b to the cancellation-branch
    JointObservables. The m_zz response is -cos(2(theta_a - theta_b)): its
    magnitude peaks every pi/2, and requiring m_zz < 0 at the peak keeps
    only the lattice theta_b = theta_a (mod pi), which the local slope of
    m_xz confirms (positive at a kept peak). A physical rotation is only
    defined modulo pi, so the search window is the caller's prior: it
    should contain one representative of theta_a mod pi. Grid minimum of
    m_zz (ties broken toward smaller |theta_b|) is refined by
    golden-section search; the result is wrapped into (-pi, pi].
    """
    lo, hi = search_range
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if hi <= lo:
        raise ValueError(f"empty search range ({lo}, {hi})")
    n_pts = int(math.floor((hi - lo) / resolution)) + 1
    grid = lo + resolution * np.arange(n_pts)
    if grid[-1] < hi - 1e-12:
        grid = np.append(grid, hi)
    m_zz = np.array([probe(t).m_zz for t in grid])
    mag = np.abs(m_zz)
    if mag.max() - mag.min() < noise_floor:
        raise ValueError(f"flat scan response: |m_zz| spread "
                         f"{mag.max() - mag.min():g} is below the noise floor "
                         f"{noise_floor:g}")
    best_val = m_zz.min()
    tied = np.flatnonzero(m_zz <= best_val + 1e-12)
    best = tied[np.argmin(np.abs(grid[tied]))]
    if m_zz[best] >= 0.0:
        raise ValueError("no anticorrelation optimum inside the search range; "
                         "widen the range so it covers theta_a mod pi")
    a = max(lo, grid[best] - resolution)
    b = min(hi, grid[best] + resolution)
    theta = _golden_section_min(lambda t: probe(t).m_zz, a, b,
                                tol=max(resolution * 1e-6, 1e-12))
    # slope of m_xz at a kept optimum is positive; a negative slope means
    # the response contradicts the m_zz < 0 branch selection
    delta = max(min(resolution, 0.05), 1e-6)
    slope = probe(theta + delta).m_xz - probe(theta - delta).m_xz
    if slope < 0.0:
        raise ValueError("scan optimum is inconsistent: m_zz < 0 but the local "
                         "m_xz slope is negative")
    theta = math.remainder(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    return theta


def _correlation_function(rho, x: float, y: float) -> float:
    e = 0.0
    for m in (0, 1):
        for n in (0, 1):
            a = AnalyzerSetting.from_polarizer(x + m * math.pi / 2.0)
            b = AnalyzerSetting.from_polarizer(y + n * math.pi / 2.0)
            p = outcome_probabilities(rho, a, b)
            e += (-1.0) ** (m + n) * p[0]
    return e


def chsh_s(rho: np.ndarray, a: float, a_prime: float, b: float,
           b_prime: float) -> float:
    """CHSH statistic |E(a,b) - E(a,b')| + |E(a',b)| + |E(a',b')| for
    linear analyzers at the given angles (radians); each correlation
    function E uses the four coincidence probabilities with either
    analyzer rotated by +90 degrees for its -1 outcome."""
    rho = validate_state(rho)
    return (abs(_correlation_function(rho, a, b) - _correlation_function(rho, a, b_prime))
            + abs(_correlation_function(rho, a_prime, b))
            + abs(_correlation_function(rho, a_prime, b_prime)))


def chsh_from_counts(table: CoincidenceTable) -> tuple[float, float]:
    """Plug-in CHSH estimate and standard error from a coincidence table.

    The table must hold exactly two distinct linear-analyzer angles per
    arm, with all four combinations present; the smaller angle of each arm
    plays the unprimed role. Correlation sigmas combine in quadrature
    since every term enters with unit |derivative|.
    """
    angles_a, angles_b = set(), set()
    for a, b in table.settings:
        for setting, bag in ((a, angles_a), (b, angles_b)):
            if not setting.setting_id.startswith("lin:"):
                raise ValueError(f"CHSH tables need linear-analyzer settings, "
                                 f"got {setting.setting_id!r}")
            bag.add(setting.setting_id)
    if len(angles_a) != 2 or len(angles_b) != 2:
        raise ValueError(f"CHSH needs two analyzer angles per arm, got "
                         f"{sorted(angles_a)} / {sorted(angles_b)}")
    key = lambda sid: float(sid.split(":")[1])
    id_a, id_ap = sorted(angles_a, key=key)
    id_b, id_bp = sorted(angles_b, key=key)
    e = {}
    for ka, kb in ((id_a, id_b), (id_a, id_bp), (id_ap, id_b), (id_ap, id_bp)):
        e[ka, kb] = estimate_correlation(_rows_for_pair(table, ka, kb))
    s = (abs(e[id_a, id_b][0] - e[id_a, id_bp][0])
         + abs(e[id_ap, id_b][0]) + abs(e[id_ap, id_bp][0]))
    sigma = math.sqrt(sum(v[1] ** 2 for v in e.values()))
    return s, sigma


def write_table(table: CoincidenceTable, path) -> None:
    """Write a coincidence table as comma-separated text with '#'-prefixed
    key=value metadata lines and a mandatory header row."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(table.metadata):
            fh.write(f"# {key}={table.metadata[key]}\n")
        fh.write("setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm\n")
        for (a, b), row in zip(table.settings, table.counts):
            vals = ",".join(f"{v:.17g}" for v in row)
            fh.write(f"{a.setting_id},{b.setting_id},{vals}\n")


def _parse_metadata_value(text: str):
    try:
        f = float(text)
    except ValueError:
        return text
    return int(f) if f.is_integer() and "." not in text and "e" not in text.lower() else f


def read_table(path) -> CoincidenceTable:
    """Read a coincidence table written by write_table."""
    metadata, settings, counts = {}, [], []
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
                    metadata[key.strip()] = _parse_metadata_value(value.strip())
                continue
            if not header_seen:
                if line.replace(" ", "") != "setting_a_id,setting_b_id,n_pp,n_pm,n_mp,n_mm":
                    raise ValueError(f"bad coincidence-table header: {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"bad coincidence-table row: {line!r}")
            settings.append((AnalyzerSetting.from_id(parts[0]),
                             AnalyzerSetting.from_id(parts[1])))
            counts.append([float(v) for v in parts[2:]])
    if not header_seen:
        raise ValueError("coincidence table has no header row")
    return CoincidenceTable(settings, np.array(counts), metadata)
