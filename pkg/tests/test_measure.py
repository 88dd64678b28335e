import math

import numpy as np
import pytest

from polarot import channels, measure, states


def evolved_bell(kind, theta_a, theta_b, visibility=1.0):
    rho = channels.apply_noise(states.bell_state(kind),
                               channels.NoiseSpec(visibility=visibility))
    return channels.apply_local(rho, channels.rotation_unitary(theta_a),
                                channels.rotation_unitary(theta_b))


def born_probabilities(rho, a, b):
    # independent oracle: explicit projector expectation values
    pa, pb = a.projectors(), b.projectors()
    return np.array([np.trace(rho @ np.kron(pa[i], pb[j])).real
                     for i in (0, 1) for j in (0, 1)])


# ---------------------------------------------------------------- analyzers

def test_named_bases_projector_kets():
    z = measure.AnalyzerSetting.from_basis("Z")
    assert np.allclose(z.plus_ket, states.KET_H)
    assert np.allclose(z.minus_ket, states.KET_V)
    x = measure.AnalyzerSetting.from_basis("X")
    assert abs(abs(np.vdot(x.plus_ket, states.KET_D)) - 1.0) < 1e-12
    y = measure.AnalyzerSetting.from_basis("Y")
    assert abs(abs(np.vdot(y.plus_ket, states.KET_L)) - 1.0) < 1e-12
    assert abs(abs(np.vdot(y.minus_ket, states.KET_R)) - 1.0) < 1e-12


def test_waveplate_analyzer_recipes():
    # HWP/QWP at (0, 0), (22.5deg, 0), (0, 45deg) measure Z, X, Y
    for (h, q), target in (((0.0, 0.0), states.KET_H),
                           ((math.pi / 8, 0.0), states.KET_D),
                           ((0.0, math.pi / 4), states.KET_L)):
        setting = measure.AnalyzerSetting.from_waveplates(h, q)
        assert abs(abs(np.vdot(setting.plus_ket, target)) - 1.0) < 1e-12


def test_analyzer_completeness():
    rng = np.random.default_rng(0)
    for _ in range(20):
        setting = measure.AnalyzerSetting.from_waveplates(*rng.uniform(-1.5, 1.5, 2))
        p_plus, p_minus = setting.projectors()
        assert np.abs(p_plus + p_minus - np.eye(2)).max() < 1e-12
        assert abs(np.vdot(setting.plus_ket, setting.minus_ket)) < 1e-12


def test_analyzer_id_round_trip():
    for setting in (measure.AnalyzerSetting.from_basis("X"),
                    measure.AnalyzerSetting.from_polarizer(math.radians(22.5)),
                    measure.AnalyzerSetting.from_waveplates(0.3, -0.2)):
        clone = measure.AnalyzerSetting.from_id(setting.setting_id)
        assert clone.setting_id == setting.setting_id
        # ids carry angles at six decimals in degrees, so compare overlaps
        assert abs(abs(np.vdot(clone.plus_ket, setting.plus_ket)) - 1.0) < 1e-12


def test_analyzer_bad_ids():
    with pytest.raises(ValueError):
        measure.AnalyzerSetting.from_basis("W")
    with pytest.raises(ValueError):
        measure.AnalyzerSetting.from_id("circ:10")


# ----------------------------------------------------- outcome probabilities

def test_outcome_probabilities_singlet_anticorrelated():
    rho = states.bell_state("psi_minus")
    z = measure.AnalyzerSetting.from_basis("Z")
    x = measure.AnalyzerSetting.from_basis("X")
    assert np.abs(measure.outcome_probabilities(rho, z, z)
                  - [0.0, 0.5, 0.5, 0.0]).max() < 1e-12
    # anticorrelation holds in the X basis as well (oracle cross-check)
    p = measure.outcome_probabilities(rho, x, x)
    assert np.abs(p - born_probabilities(rho, x, x)).max() < 1e-12
    assert np.abs(p - [0.0, 0.5, 0.5, 0.0]).max() < 1e-12


def test_outcome_probabilities_mixed_uniform():
    rho = states.maximally_mixed()
    a = measure.AnalyzerSetting.from_polarizer(0.3)
    b = measure.AnalyzerSetting.from_waveplates(0.1, 1.0)
    p = measure.outcome_probabilities(rho, a, b)
    assert np.abs(p - 0.25).max() < 1e-12


def test_outcome_probabilities_sum_to_one():
    rng = np.random.default_rng(1)
    rho = evolved_bell("psi_plus", 0.4, -0.2, visibility=0.9)
    for _ in range(10):
        a = measure.AnalyzerSetting.from_waveplates(*rng.uniform(-1, 1, 2))
        b = measure.AnalyzerSetting.from_polarizer(rng.uniform(-1, 1))
        p = measure.outcome_probabilities(rho, a, b)
        assert (p >= 0).all()
        assert abs(p.sum() - 1.0) < 1e-12


# ------------------------------------------------------- joint expectations

def test_joint_expectation_examples():
    # equal rotations leave the cancellation branch fully anticorrelated
    for theta in (0.0, 0.4, -1.1):
        rho = evolved_bell("psi_minus", theta, theta)
        assert abs(measure.joint_expectation(rho, states.PAULI_Z, states.PAULI_Z)
                   + 1.0) < 1e-12
    # oracle: full matrix evaluation of Tr[rho sz x sz]
    rho = evolved_bell("psi_plus", math.radians(20), math.radians(10))
    oracle = float(np.trace(rho @ np.kron(states.PAULI_Z, states.PAULI_Z)).real)
    assert abs(oracle - (-0.5)) < 1e-12
    assert abs(measure.joint_expectation(rho, states.PAULI_Z, states.PAULI_Z)
               - oracle) < 1e-12
    rho = evolved_bell("psi_minus", math.radians(20), math.radians(10))
    m_xz = measure.joint_expectation(rho, states.PAULI_X, states.PAULI_Z)
    assert abs(m_xz - (-math.sin(math.radians(20)))) < 1e-12


def test_closed_forms_random_angles():
    rng = np.random.default_rng(2)
    for _ in range(200):
        ta, tb = rng.uniform(-math.pi, math.pi, 2)
        kind, sign = ("psi_plus", 1.0) if rng.random() < 0.5 else ("psi_minus", -1.0)
        obs = measure.exact_observables(evolved_bell(kind, ta, tb))
        tpm = ta + sign * tb
        assert abs(obs.m_zz + math.cos(2 * tpm)) < 1e-12
        assert abs(obs.m_xz + math.sin(2 * tpm)) < 1e-12
        assert abs(obs.m_xz - sign * obs.m_zx) < 1e-12


def test_entangled_extrema_full_swing():
    # the swing of m_zz over theta_b reaches the extreme values +-1 exactly
    # (at theta_b = -+theta_a) and never exceeds them
    for kind, sign in (("psi_plus", 1.0), ("psi_minus", -1.0)):
        for ta in (0.3, -0.9, 1.2):
            peak = measure.exact_observables(evolved_bell(kind, ta, -sign * ta)).m_zz
            assert abs(peak + 1.0) < 1e-12
            values = [measure.exact_observables(evolved_bell(kind, ta, tb)).m_zz
                      for tb in np.linspace(-math.pi / 2, math.pi / 2, 61)]
            assert max(np.abs(values)) <= 1.0 + 1e-12


# ------------------------------------------------------ separable contrast

def test_separable_expectations_against_born_oracle():
    z = measure.AnalyzerSetting.from_basis("Z")
    x = measure.AnalyzerSetting.from_basis("X")
    rng = np.random.default_rng(3)
    for _ in range(25):
        ta, tb = rng.uniform(-math.pi, math.pi, 2)
        rho = channels.apply_local(
            states.separable_state(states.ket("H"), states.ket("V")),
            channels.rotation_unitary(ta), channels.rotation_unitary(tb))
        obs = measure.separable_expectations(ta, tb)
        for (sa, sb), value in (((z, z), obs.m_zz), ((x, z), obs.m_xz),
                                ((z, x), obs.m_zx)):
            p = born_probabilities(rho, sa, sb)
            assert abs((p[0] - p[1] - p[2] + p[3]) - value) < 1e-12


def test_separable_expectation_values():
    obs = measure.separable_expectations(0.0, 0.0)
    assert abs(abs(obs.m_zz) - 1.0) < 1e-15
    assert abs(obs.m_xz) < 1e-15
    obs = measure.separable_expectations(math.radians(22.5), 0.0)
    assert abs(abs(obs.m_zz) - math.sqrt(2) / 2) < 1e-12
    assert abs(obs.m_xz + math.sqrt(2) / 2) < 1e-12
    for ta in np.linspace(-1.5, 1.5, 7):
        assert abs(measure.separable_expectations(ta, math.radians(45)).m_zz) < 1e-12


def test_separable_amplitude_bounded_by_cosine():
    rng = np.random.default_rng(4)
    for _ in range(100):
        ta, tb = rng.uniform(-math.pi, math.pi, 2)
        obs = measure.separable_expectations(ta, tb)
        assert abs(obs.m_zz) <= abs(math.cos(2 * tb)) + 1e-12


# ------------------------------------------------------------- Monte Carlo

def make_named_settings():
    z = measure.AnalyzerSetting.from_basis("Z")
    x = measure.AnalyzerSetting.from_basis("X")
    return [(z, z), (x, z), (z, x)]


def test_simulate_counts_deterministic():
    rho = evolved_bell("psi_plus", 0.2, 0.1)
    kwargs = dict(pair_flux=1e4, duration=1.0, seed=42)
    t1 = measure.simulate_counts(rho, make_named_settings(), **kwargs)
    t2 = measure.simulate_counts(rho, make_named_settings(), **kwargs)
    assert np.array_equal(t1.counts, t2.counts)
    t3 = measure.simulate_counts(rho, make_named_settings(), pair_flux=1e4,
                                 duration=1.0, seed=43)
    assert not np.array_equal(t1.counts, t3.counts)


def test_simulate_counts_law_of_large_numbers():
    rho = evolved_bell("psi_plus", 0.3, -0.1, visibility=0.95)
    settings = make_named_settings()
    n = 400000
    table = measure.simulate_counts(rho, settings, pair_flux=n, duration=1.0, seed=7)
    for k, (a, b) in enumerate(settings):
        p = measure.outcome_probabilities(rho, a, b)
        total = table.counts[k].sum()
        freq = table.counts[k] / total
        bound = 3.0 * np.sqrt(p * (1 - p) / total) + 1e-9
        assert (np.abs(freq - p) <= bound).all()


def test_simulate_counts_transmission_scaling():
    rho = states.bell_state("psi_plus")
    settings = make_named_settings()
    lam = 2e5
    table = measure.simulate_counts(rho, settings, pair_flux=lam, duration=1.0,
                                    transmission_a=0.75, transmission_b=0.75,
                                    seed=11)
    expected = lam * 0.75 * 0.75  # 0.5625 of the lossless rate
    totals = table.counts.sum(axis=1)
    for total in totals:
        assert abs(total - expected) <= 4.0 * math.sqrt(expected)


def test_simulate_counts_accidentals_uniform():
    # a pure accidental table is uniform over outcomes
    rho = states.separable_state(states.ket("H"), states.ket("V"))
    z = measure.AnalyzerSetting.from_basis("Z")
    table = measure.simulate_counts(rho, [(z, z)], pair_flux=4e5, duration=1.0,
                                    accidental_fraction=0.999, seed=3)
    freq = table.counts[0] / table.counts[0].sum()
    assert np.abs(freq - 0.25).max() < 0.01


def test_simulate_counts_validation():
    rho = states.bell_state("psi_plus")
    with pytest.raises(ValueError, match="must not be empty"):
        measure.simulate_counts(rho, [], pair_flux=1.0, duration=1.0, seed=0)
    with pytest.raises(ValueError, match="positive"):
        measure.simulate_counts(rho, make_named_settings(), pair_flux=1.0,
                                duration=0.0, seed=0)
    with pytest.raises(ValueError, match="transmission_a"):
        measure.simulate_counts(rho, make_named_settings(), pair_flux=1.0,
                                duration=1.0, transmission_a=1.5, seed=0)


def test_exact_table_matches_born():
    rho = evolved_bell("psi_minus", 0.25, 0.1, visibility=0.9)
    settings = make_named_settings()
    table = measure.exact_table(rho, settings, pair_flux=1e5, duration=2.0,
                                transmission_a=0.75, transmission_b=0.75)
    lam = 1e5 * 2.0 * 0.5625
    for k, (a, b) in enumerate(settings):
        p = measure.outcome_probabilities(rho, a, b)
        assert np.abs(table.counts[k] - lam * p).max() < 1e-6


# -------------------------------------------------------------- estimators

def test_estimate_correlation_examples():
    m, sigma = measure.estimate_correlation([0, 500, 500, 0])
    assert m == -1.0 and sigma == 0.0
    n = 10000
    m, sigma = measure.estimate_correlation([n / 4] * 4)
    assert m == 0.0
    assert abs(sigma - 1.0 / math.sqrt(n)) < 1e-15
    with pytest.raises(ValueError, match="zero total"):
        measure.estimate_correlation([0, 0, 0, 0])


def test_estimate_observables_statistical():
    rho = evolved_bell("psi_plus", math.radians(20), math.radians(10))
    table = measure.simulate_counts(rho, make_named_settings(), pair_flux=1e5,
                                    duration=1.0, seed=19)
    obs = measure.estimate_observables(table)
    assert abs(obs.m_zz - (-0.5)) <= 3.0 * obs.sigma_zz
    assert abs(obs.m_xz - (-math.sin(math.radians(60)))) <= 3.0 * obs.sigma_xz


def test_estimate_observables_missing_pair():
    z = measure.AnalyzerSetting.from_basis("Z")
    table = measure.CoincidenceTable([(z, z)], np.array([[1.0, 2.0, 3.0, 4.0]]))
    with pytest.raises(ValueError, match=r"\(X, Z\)"):
        measure.estimate_observables(table)


def test_exact_mode_estimation_reproduces_closed_forms():
    ta, tb = math.radians(20), math.radians(10)
    rho = evolved_bell("psi_plus", ta, tb)
    table = measure.exact_table(rho, make_named_settings(), pair_flux=1e5,
                                duration=1.0)
    obs = measure.estimate_observables(table)
    assert abs(obs.m_zz + math.cos(2 * (ta + tb))) < 1e-12
    assert abs(obs.m_xz + math.sin(2 * (ta + tb))) < 1e-12


def test_rotation_from_observables():
    ta = math.radians(33.0)
    theta, sigma = measure.rotation_from_observables(-math.cos(2 * ta),
                                                     -math.sin(2 * ta))
    assert abs(theta - ta) < 1e-12
    assert sigma == 0.0


# --------------------------------------------------------------- extraction

def test_extract_thetas_trivial():
    obs = measure.JointObservables(-1.0, 0.0, 0.0)
    ta, tb = measure.extract_thetas(obs, obs)
    assert abs(ta) < 1e-15 and abs(tb) < 1e-15


@pytest.mark.parametrize("ta_deg,tb_deg", [(20.0, 10.0), (-30.0, 5.0),
                                           (44.0, -44.0), (1.0, 43.0)])
def test_extract_thetas_round_trip(ta_deg, tb_deg):
    ta, tb = math.radians(ta_deg), math.radians(tb_deg)
    obs_p = measure.exact_observables(evolved_bell("psi_plus", ta, tb))
    obs_m = measure.exact_observables(evolved_bell("psi_minus", ta, tb))
    ta_hat, tb_hat = measure.extract_thetas(obs_p, obs_m)
    assert abs(ta_hat - ta) < 1e-9
    assert abs(tb_hat - tb) < 1e-9


def test_extract_thetas_branch_wrap_outside_window():
    # one degree outside the +-45 deg validity window the principal branch
    # wraps the answer by 90 degrees
    ta = math.radians(46.0)
    obs_p = measure.exact_observables(evolved_bell("psi_plus", ta, 0.0))
    obs_m = measure.exact_observables(evolved_bell("psi_minus", ta, 0.0))
    ta_hat, tb_hat = measure.extract_thetas(obs_p, obs_m)
    assert abs(ta_hat - (ta - math.pi / 2)) < 1e-9
    assert abs(tb_hat) < 1e-9


def test_extract_thetas_ill_conditioned():
    obs = measure.JointObservables(0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="ill-conditioned"):
        measure.extract_thetas(obs, obs)


# --------------------------------------------------------------------- scan

def exact_probe(ta):
    def probe(tb):
        return measure.exact_observables(evolved_bell("psi_minus", ta, tb))
    return probe


def test_scan_exact_zero():
    theta = measure.scan_theta_a(exact_probe(0.0), (-math.pi, math.pi),
                                 math.radians(5.0))
    assert abs(theta) < math.radians(0.01)


def test_scan_exact_wide_angle():
    # 100 degrees lies outside the closed-form window; the scan with a
    # half-turn prior window still finds it
    ta = math.radians(100.0)
    theta = measure.scan_theta_a(exact_probe(ta), (0.0, math.pi),
                                 math.radians(5.0))
    assert abs(theta - ta) < math.radians(0.01)


def test_scan_exact_negative_angle():
    ta = math.radians(-70.0)
    theta = measure.scan_theta_a(exact_probe(ta), (-math.pi / 2 - 0.5, 0.2),
                                 math.radians(4.0))
    assert abs(theta - ta) < math.radians(0.01)


def test_scan_noisy_repeatability():
    # tolerance frozen from a repeatability study at 1e5 pairs per point
    ta = math.radians(20.0)
    z = measure.AnalyzerSetting.from_basis("Z")
    x = measure.AnalyzerSetting.from_basis("X")
    rho0 = states.bell_state("psi_minus")

    for rep in range(5):
        calls = [0]

        def probe(tb):
            calls[0] += 1
            rho = channels.apply_local(rho0, channels.rotation_unitary(ta),
                                       channels.rotation_unitary(tb))
            seed = int(np.random.SeedSequence(entropy=1000 + rep,
                                              spawn_key=(calls[0],)).generate_state(1)[0])
            table = measure.simulate_counts(rho, [(z, z), (x, z), (z, x)],
                                            pair_flux=1e5, duration=1.0, seed=seed)
            return measure.estimate_observables(table)

        theta = measure.scan_theta_a(probe, (-math.pi / 4, math.pi / 2),
                                     math.radians(5.0))
        assert abs(theta - ta) < math.radians(0.5)


def test_scan_flat_response_rejected():
    def probe(tb):
        return measure.exact_observables(states.maximally_mixed())
    with pytest.raises(ValueError, match="flat scan response"):
        measure.scan_theta_a(probe, (-1.0, 1.0), 0.1)


def test_scan_validation():
    with pytest.raises(ValueError, match="resolution"):
        measure.scan_theta_a(exact_probe(0.0), (-1.0, 1.0), 0.0)
    with pytest.raises(ValueError, match="empty search range"):
        measure.scan_theta_a(exact_probe(0.0), (1.0, -1.0), 0.1)


# --------------------------------------------------------------------- CHSH

CHSH_ANGLES = tuple(math.radians(v) for v in (0.0, 45.0, 22.5, 67.5))


def test_chsh_maximal_violation():
    for kind in states.BELL_KINDS:
        s = measure.chsh_s(states.bell_state(kind), *CHSH_ANGLES)
        assert abs(s - 2.0 * math.sqrt(2.0)) < 1e-9


def test_chsh_mixed_state_zero():
    assert abs(measure.chsh_s(states.maximally_mixed(), *CHSH_ANGLES)) < 1e-12


def test_chsh_werner_scaling():
    p = (4.0 * 0.984 - 1.0) / 3.0
    s = measure.chsh_s(states.werner_state(p), *CHSH_ANGLES)
    assert abs(s - 2.0 * math.sqrt(2.0) * p) < 1e-9
    assert abs(s - 2.768) < 2e-3


def test_chsh_separable_classical_bound():
    rng = np.random.default_rng(6)
    for _ in range(50):
        ka = rng.normal(size=2) + 1j * rng.normal(size=2)
        kb = rng.normal(size=2) + 1j * rng.normal(size=2)
        rho = states.separable_state(ka / np.linalg.norm(ka), kb / np.linalg.norm(kb))
        angles = rng.uniform(-math.pi, math.pi, 4)
        assert measure.chsh_s(rho, *angles) <= 2.0 + 1e-9


def chsh_settings():
    a, ap, b, bp = CHSH_ANGLES
    mk = measure.AnalyzerSetting.from_polarizer
    return [(mk(x), mk(y)) for x in (a, ap) for y in (b, bp)]


def test_chsh_from_counts_ideal():
    rho = states.bell_state("psi_plus")
    table = measure.simulate_counts(rho, chsh_settings(), pair_flux=1e5,
                                    duration=1.0, seed=21)
    s, sigma = measure.chsh_from_counts(table)
    assert abs(s - 2.8284) <= 3.0 * sigma


def test_chsh_from_counts_separable_bounded():
    rho = states.separable_state(states.ket("H"), states.ket("V"))
    table = measure.simulate_counts(rho, chsh_settings(), pair_flux=1e5,
                                    duration=1.0, seed=22)
    s, sigma = measure.chsh_from_counts(table)
    assert s <= 2.0 + 3.0 * sigma


def test_chsh_sigma_scales_inverse_sqrt_n():
    rho = states.bell_state("psi_plus")
    sigmas = []
    for n in (1e3, 1e4, 1e5):
        table = measure.simulate_counts(rho, chsh_settings(), pair_flux=n,
                                        duration=1.0, seed=23)
        sigmas.append(measure.chsh_from_counts(table)[1])
    assert abs(sigmas[0] / sigmas[1] - math.sqrt(10.0)) < 0.6
    assert abs(sigmas[1] / sigmas[2] - math.sqrt(10.0)) < 0.6


def test_chsh_from_counts_validation():
    z = measure.AnalyzerSetting.from_basis("Z")
    table = measure.CoincidenceTable([(z, z)], np.array([[1.0, 1.0, 1.0, 1.0]]))
    with pytest.raises(ValueError, match="linear-analyzer"):
        measure.chsh_from_counts(table)
    mk = measure.AnalyzerSetting.from_polarizer
    table = measure.CoincidenceTable([(mk(0.0), mk(0.4))],
                                     np.array([[1.0, 1.0, 1.0, 1.0]]))
    with pytest.raises(ValueError, match="two analyzer angles"):
        measure.chsh_from_counts(table)


# ------------------------------------------------------------------- files

def test_table_file_round_trip(tmp_path):
    rho = evolved_bell("psi_plus", 0.11, -0.07)
    settings = make_named_settings() + [
        (measure.AnalyzerSetting.from_polarizer(math.radians(22.5)),
         measure.AnalyzerSetting.from_waveplates(0.1, 0.2))]
    table = measure.simulate_counts(rho, settings, pair_flux=5e3, duration=1.0,
                                    seed=31)
    path = tmp_path / "counts.csv"
    measure.write_table(table, path)
    loaded = measure.read_table(path)
    assert np.array_equal(loaded.counts, table.counts)
    assert [(a.setting_id, b.setting_id) for a, b in loaded.settings] \
        == [(a.setting_id, b.setting_id) for a, b in table.settings]
    assert loaded.metadata["rng_seed"] == 31
    assert loaded.metadata["pair_flux"] == 5e3


def test_table_rejects_negative_counts():
    z = measure.AnalyzerSetting.from_basis("Z")
    with pytest.raises(ValueError, match="nonnegative"):
        measure.CoincidenceTable([(z, z)], np.array([[1.0, -2.0, 0.0, 0.0]]))


def test_read_table_requires_header(tmp_path):
    path = tmp_path / "broken.csv"
    path.write_text("Z,Z,1,2,3,4\n")
    with pytest.raises(ValueError, match="header"):
        measure.read_table(path)
