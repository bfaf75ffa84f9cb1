import dataclasses
import math

import numpy as np
import pytest

import irsopt
from irsopt.beamforming import mrt_equivalent_beamformer, mrt_policy
from irsopt.channel import (
    EstimatedCsiSampler,
    PhysicalChannelSampler,
    CsiSample,
    build_statistics,
    sample_estimated_csi,
)
from irsopt.rate import (
    PhaseShiftVector,
    RateReport,
    UbQuadraticRatio,
    ergodic_rate_mc,
    error_power_constant,
    expected_signal_power_closed_form,
    g0,
    gamma_ub,
    gamma_ub_gradient,
    gk,
    interference_quadratic,
    phase_array,
    sinr_denominator,
    upper_bound_rate,
    upper_bound_rate_closed_form,
)
from conftest import paired_t, random_phase_vector, random_relaxed


def fd_gradient(fn, v: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences on real and imaginary parts, combined into
    the formal derivative (d/dx - i d/dy)/2."""
    out = np.zeros(v.shape[0], dtype=complex)
    for n in range(v.shape[0]):
        dx_p, dx_m = v.copy(), v.copy()
        dx_p[n] += step
        dx_m[n] -= step
        dx = (fn(dx_p) - fn(dx_m)) / (2 * step)
        dy_p, dy_m = v.copy(), v.copy()
        dy_p[n] += 1j * step
        dy_m[n] -= 1j * step
        dy = (fn(dy_p) - fn(dy_m)) / (2 * step)
        out[n] = 0.5 * (dx - 1j * dy)
    return out


def _single_bs_cfg(irs_grid=(2, 2), bs_grid=(2, 2), rician=3.0, delta=0.0):
    return irsopt.ScenarioConfig(
        name="single",
        bs_positions=((0.0, 0.0),),
        irs_position=(40.0, 10.0),
        user_position=(80.0, -15.0),
        bs_grids=(bs_grid,),
        irs_grid=irs_grid,
        powers_dbm=(30.0,),
        noise_dbm=-90.0,
        rician_bs_irs=(rician,),
        rician_irs_user=rician,
        angles_bs_irs=((0.4, 0.9),),
        angles_irs_user=(1.0, 0.5),
        delta1=delta,
        delta2=delta,
    )


# ---------------------------------------------------------------------------
# g0
# ---------------------------------------------------------------------------

def test_g0_zero_error_is_plain_signal(small_cfg, small_stats):
    rng = np.random.default_rng(0)
    sample = sample_estimated_csi(small_stats, small_cfg, 1)
    v = random_phase_vector(rng, small_stats.irs_size)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w /= np.linalg.norm(w)
    e = sample.g_hat.conj().T @ v.v + sample.h_hat
    expected = abs(np.vdot(e, w)) ** 2
    assert np.isclose(g0(v, w, sample, 0.0, 0.0), expected, rtol=1e-12)


def test_g0_orthogonal_beamformer_leaves_constants(small_cfg, small_stats):
    rng = np.random.default_rng(1)
    sample = sample_estimated_csi(small_stats, small_cfg, 2)
    v = random_phase_vector(rng, small_stats.irs_size)
    e = sample.g_hat.conj().T @ v.v + sample.h_hat
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w = u - (np.vdot(e, u) / np.vdot(e, e)) * e
    w /= np.linalg.norm(w)
    d1, d2 = 3e-8, 5e-8
    expected = error_power_constant(small_stats.irs_size, d1, d2)
    assert np.isclose(g0(v, w, sample, d1, d2), expected, rtol=1e-9)


def test_g0_brute_force_error_expectation(small_cfg):
    # oracle: average the signal power over explicit CSI-error draws
    cfg = small_cfg.replace(delta1=0.5, delta2=0.5)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(2)
    sample = sample_estimated_csi(stats, cfg, 3)
    v = random_phase_vector(rng, stats.irs_size)
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w /= np.linalg.norm(w)

    n = 100_000
    d1, d2 = stats.delta1_abs, stats.delta2_abs
    dg = (rng.standard_normal((n, stats.irs_size, 4))
          + 1j * rng.standard_normal((n, stats.irs_size, 4))) * math.sqrt(d1 ** 2 / 2)
    dh = (rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))) * math.sqrt(d2 ** 2 / 2)
    e = np.einsum("nmi,m->ni", (sample.g_hat[None] + dg).conj(), v.v) + sample.h_hat[None] + dh
    sampled = float(np.mean(np.abs(np.einsum("ni,i->n", e.conj(), w)) ** 2))
    closed = g0(v, w, sample, d1, d2)
    assert abs(sampled - closed) / closed < 0.01


def test_g0_dimension_mismatch(small_cfg, small_stats):
    sample = sample_estimated_csi(small_stats, small_cfg, 1)
    v_bad = PhaseShiftVector.ones(small_stats.irs_size + 1)
    w = np.zeros(4)
    w[0] = 1.0
    with pytest.raises(ValueError, match="dimension mismatch"):
        g0(v_bad, w, sample, 0.0, 0.0)


def test_g0_requires_unit_beamformer(small_cfg, small_stats):
    sample = sample_estimated_csi(small_stats, small_cfg, 1)
    v = PhaseShiftVector.ones(small_stats.irs_size)
    with pytest.raises(ValueError, match="unit-norm"):
        g0(v, np.ones(4), sample, 0.0, 0.0)


# ---------------------------------------------------------------------------
# gk / denominator
# ---------------------------------------------------------------------------

def test_gk_serving_index_rejected(small_stats):
    v = PhaseShiftVector.ones(small_stats.irs_size)
    with pytest.raises(ValueError, match="serving"):
        gk(v, small_stats, 0)
    with pytest.raises(ValueError, match="out of range"):
        gk(v, small_stats, small_stats.n_bs)


def test_gk_zero_los(small_cfg):
    cfg = small_cfg.replace(rician_bs_irs=(0.0, 0.0, 0.0))
    stats = build_statistics(cfg)
    v = PhaseShiftVector.ones(stats.irs_size)
    expected = (stats.alpha_bs_irs[1] * stats.alpha_irs_user * stats.irs_size
                + stats.alpha_direct[1])
    assert np.isclose(gk(v, stats, 1), expected, rtol=1e-12)


def test_gk_pure_los_no_direct(small_cfg):
    cfg = small_cfg.replace(rician_bs_irs=(math.inf,) * 3, rician_irs_user=math.inf,
                            delta1=0.0, delta2=0.0)
    stats = build_statistics(cfg)
    stats = dataclasses.replace(stats, alpha_direct=np.array([stats.alpha_direct[0], 0.0, 0.0]))
    rng = np.random.default_rng(3)
    v = random_phase_vector(rng, stats.irs_size)
    expected = np.linalg.norm(v.v.conj() @ stats.cascaded_los[1]) ** 2 / stats.bs_sizes[1]
    assert np.isclose(gk(v, stats, 1), expected, rtol=1e-12)


def test_gk_brute_force_mrt_oracle(small_cfg, small_stats):
    # oracle: sample interferer channels and average the MRT leakage power
    rng = np.random.default_rng(4)
    v = random_phase_vector(rng, small_stats.irs_size)
    n = 100_000
    sampler = PhysicalChannelSampler(small_stats, 71, include_interference=True)
    batch = sampler.draw(n)
    for k in (1, 2):
        g, h, h_own = batch.interference[k - 1]
        w = h_own / np.linalg.norm(h_own, axis=1, keepdims=True)
        a = np.einsum("nmi,m->ni", g.conj(), v.v) + h
        sampled = float(np.mean(np.abs(np.einsum("ni,ni->n", a.conj(), w)) ** 2))
        closed = gk(v, small_stats, k)
        assert abs(sampled - closed) / closed < 0.01


def test_sinr_denominator_no_interferers():
    cfg = _single_bs_cfg()
    stats = build_statistics(cfg)
    v = PhaseShiftVector.ones(stats.irs_size)
    assert sinr_denominator(v, stats, cfg) == cfg.noise_watt


def test_sinr_denominator_increasing_in_power(preset_cfg, preset_stats):
    v = PhaseShiftVector.ones(preset_stats.irs_size)
    base = sinr_denominator(v, preset_stats, preset_cfg)
    louder = preset_cfg.replace(powers_dbm=(30.0, 33.0, 30.0))
    assert sinr_denominator(v, preset_stats, louder) > base


def test_denominator_quadratic_matches_sum(preset_cfg, preset_stats):
    rng = np.random.default_rng(5)
    quad, const = interference_quadratic(preset_stats, preset_cfg)
    for _ in range(5):
        v = phase_array(random_phase_vector(rng, preset_stats.irs_size))
        via_quad = const + float(np.real(v.conj() @ quad @ v))
        assert np.isclose(via_quad, sinr_denominator(v, preset_stats, preset_cfg),
                          rtol=1e-12)


# ---------------------------------------------------------------------------
# upper-bound rate
# ---------------------------------------------------------------------------

def test_upper_bound_mc_matches_closed_form(small_cfg):
    cfg = small_cfg.replace(delta1=0.3, delta2=0.3)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(6)
    v = random_phase_vector(rng, stats.irs_size)

    n = 10_000
    g_hat, h_hat = EstimatedCsiSampler(stats, 55).draw(n)
    e = np.einsum("nmi,m->ni", g_hat.conj(), v.v) + h_hat
    signal = np.real(np.einsum("ni,ni->n", e.conj(), e))
    mean, se = float(np.mean(signal)), float(np.std(signal, ddof=1) / math.sqrt(n))
    c = error_power_constant(stats.irs_size, stats.delta1_abs, stats.delta2_abs)
    den = sinr_denominator(v, stats, cfg)
    lo = math.log2(1 + cfg.powers_watt[0] * (mean - 3 * se + c) / den)
    hi = math.log2(1 + cfg.powers_watt[0] * (mean + 3 * se + c) / den)

    ub_mc = upper_bound_rate(v, stats, cfg, n, 55)
    ub_cf = upper_bound_rate_closed_form(v, stats, cfg)
    assert lo <= ub_cf <= hi
    assert lo <= ub_mc <= hi


def test_upper_bound_zero_variance_deterministic(small_cfg):
    cfg = small_cfg.replace(delta1=1.0, delta2=1.0)
    stats = build_statistics(cfg)
    v = PhaseShiftVector.ones(stats.irs_size)
    ub_mc = upper_bound_rate(v, stats, cfg, 50, 1)
    ub_cf = upper_bound_rate_closed_form(v, stats, cfg)
    assert np.isclose(ub_mc, ub_cf, rtol=1e-12)


def test_upper_bound_monotone_in_power(preset_cfg, preset_stats):
    v = PhaseShiftVector.ones(preset_stats.irs_size)
    base = upper_bound_rate_closed_form(v, preset_stats, preset_cfg)
    stronger = preset_cfg.replace(powers_dbm=(33.0, 30.0, 30.0))
    assert upper_bound_rate_closed_form(v, preset_stats, stronger) > base


def test_expected_signal_power_closed_form_vs_sampling(small_cfg):
    cfg = small_cfg.replace(delta1=0.4, delta2=0.1)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(7)
    v = random_phase_vector(rng, stats.irs_size)
    n = 100_000
    g_hat, h_hat = EstimatedCsiSampler(stats, 91).draw(n)
    e = np.einsum("nmi,m->ni", g_hat.conj(), v.v) + h_hat
    sampled = float(np.mean(np.real(np.einsum("ni,ni->n", e.conj(), e))))
    closed = expected_signal_power_closed_form(v, stats)
    assert abs(sampled - closed) / closed < 0.02


# ---------------------------------------------------------------------------
# ergodic rate
# ---------------------------------------------------------------------------

def test_ergodic_deterministic_single_bs():
    cfg = _single_bs_cfg(rician=math.inf)
    stats = build_statistics(cfg)
    stats = dataclasses.replace(stats, alpha_direct=np.array([0.0]))
    v = PhaseShiftVector.ones(stats.irs_size)
    report = ergodic_rate_mc(v, mrt_policy(v), stats, cfg, 20, 3,
                             return_samples=True)
    expected = math.log2(
        1 + cfg.powers_watt[0]
        * np.linalg.norm(stats.cascaded_los[0].conj().T @ v.v) ** 2 / cfg.noise_watt)
    assert np.isclose(report.mc_rate, expected, rtol=1e-12)
    # every draw collapses to the same value; stderr is summation noise only
    assert np.ptp(report.rate_samples) == 0.0
    assert report.mc_stderr < 1e-12 * report.mc_rate


def test_ergodic_below_upper_bound(small_cfg):
    for delta in (0.1, 0.6):
        cfg = small_cfg.replace(delta1=delta, delta2=delta)
        stats = build_statistics(cfg)
        rng = np.random.default_rng(8)
        v = random_phase_vector(rng, stats.irs_size)
        report = ergodic_rate_mc(v, mrt_policy(v), stats, cfg, 4000, 13)
        assert report.ub_rate >= report.mc_rate - 3 * report.mc_stderr


def test_perfect_csi_beats_imperfect_paired(small_cfg):
    results = {}
    for delta in (0.0, 0.7):
        cfg = small_cfg.replace(delta1=delta, delta2=delta)
        stats = build_statistics(cfg)
        v = PhaseShiftVector.ones(stats.irs_size)
        results[delta] = ergodic_rate_mc(v, mrt_policy(v), stats, cfg, 3000, 17,
                                         return_samples=True)
    diff, se, t = paired_t(results[0.0].rate_samples, results[0.7].rate_samples)
    assert t > 3.0, f"perfect CSI should win: diff={diff}, t={t}"


def test_ergodic_report_fields(small_cfg, small_stats):
    v = PhaseShiftVector.ones(small_stats.irs_size)
    report = ergodic_rate_mc(v, mrt_policy(v), small_stats, small_cfg, 500, 19)
    assert report.n_samples == 500
    assert report.signal_power > 0
    assert len(report.interference_power) == 2
    assert report.noise_power == small_cfg.noise_watt
    assert report.rate_samples is None
    payload = report.to_dict()
    assert set(payload) == {"ub_rate", "mc_rate", "mc_stderr", "n_samples",
                            "signal_power", "interference_power", "noise_power"}


def test_ergodic_determinism(small_cfg, small_stats):
    v = PhaseShiftVector.ones(small_stats.irs_size)
    a = ergodic_rate_mc(v, mrt_policy(v), small_stats, small_cfg, 600, 23,
                        return_samples=True)
    b = ergodic_rate_mc(v, mrt_policy(v), small_stats, small_cfg, 600, 23,
                        return_samples=True)
    np.testing.assert_array_equal(a.rate_samples, b.rate_samples)


def test_rate_report_validation():
    with pytest.raises(ValueError):
        RateReport(ub_rate=1.0, mc_rate=1.0, mc_stderr=-0.1, n_samples=1,
                   signal_power=1.0, interference_power=(), noise_power=1.0)
    with pytest.raises(ValueError):
        RateReport(ub_rate=1.0, mc_rate=1.0, mc_stderr=0.1, n_samples=1,
                   signal_power=-1.0, interference_power=(), noise_power=1.0)


# ---------------------------------------------------------------------------
# gamma_ub and its gradient
# ---------------------------------------------------------------------------

def test_gamma_matches_g0_over_denominator(small_cfg):
    cfg = small_cfg.replace(delta1=0.2, delta2=0.4)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(9)
    for trial in range(5):
        sample = sample_estimated_csi(stats, cfg, 100 + trial)
        v = random_phase_vector(rng, stats.irs_size)
        w = mrt_equivalent_beamformer(v, sample)
        direct = (cfg.powers_watt[0]
                  * g0(v, w, sample, stats.delta1_abs, stats.delta2_abs)
                  / sinr_denominator(v, stats, cfg))
        assert np.isclose(gamma_ub(v, sample, stats, cfg), direct, rtol=1e-12)


def test_gamma_zero_cascade_ignores_v(small_cfg, small_stats):
    h_hat = np.array([0.3 + 0.1j, -0.2j, 0.5, 0.1 + 0.7j]) * 1e-6
    sample = CsiSample(g_hat=np.zeros((small_stats.irs_size, 4), dtype=complex),
                       h_hat=h_hat)
    rng = np.random.default_rng(10)
    v1 = random_phase_vector(rng, small_stats.irs_size)
    v2 = random_phase_vector(rng, small_stats.irs_size)
    a = gamma_ub(v1, sample, small_stats, small_cfg)
    b = gamma_ub(v2, sample, small_stats, small_cfg)
    # numerator no longer depends on v; denominator still does (interferer LoS)
    num_a = a * sinr_denominator(v1, small_stats, small_cfg)
    num_b = b * sinr_denominator(v2, small_stats, small_cfg)
    assert np.isclose(num_a, num_b, rtol=1e-12)
    assert a > 0 and b > 0


def test_gamma_strictly_positive(small_cfg):
    cfg = small_cfg.replace(delta1=0.5, delta2=0.5)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(11)
    sample = sample_estimated_csi(stats, cfg, 200)
    floor = (cfg.powers_watt[0]
             * error_power_constant(stats.irs_size, stats.delta1_abs, stats.delta2_abs))
    v = random_relaxed(rng, stats.irs_size)
    value = gamma_ub(v, sample, stats, cfg)
    assert value > 0
    assert value * sinr_denominator(v, stats, cfg) >= floor * 0.999


def test_gradient_matches_finite_differences(small_cfg):
    cfg = small_cfg.replace(delta1=0.3, delta2=0.2)
    stats = build_statistics(cfg)
    rng = np.random.default_rng(12)
    for trial in range(10):
        sample = sample_estimated_csi(stats, cfg, 300 + trial)
        v = random_relaxed(rng, stats.irs_size)
        grad = gamma_ub_gradient(v, sample, stats, cfg)
        fd = fd_gradient(lambda u: gamma_ub(u, sample, stats, cfg), v)
        assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-5


def test_gradient_first_order_expansion(small_cfg, small_stats):
    rng = np.random.default_rng(13)
    sample = sample_estimated_csi(small_stats, small_cfg, 400)
    v = random_relaxed(rng, small_stats.irs_size)
    grad = gamma_ub_gradient(v, sample, small_stats, small_cfg)
    dv = 1e-7 * (rng.standard_normal(v.shape[0]) + 1j * rng.standard_normal(v.shape[0]))
    predicted = 2.0 * float(np.real(np.sum(grad * dv)))
    actual = (gamma_ub(v + dv, sample, small_stats, small_cfg)
              - gamma_ub(v, sample, small_stats, small_cfg))
    assert np.isclose(actual, predicted, rtol=1e-4)


def test_gradient_constant_denominator_form():
    # no interferers: gradient reduces to the conjugate-linear numerator map
    cfg = _single_bs_cfg(irs_grid=(2, 2))
    stats = build_statistics(cfg)
    rng = np.random.default_rng(14)
    sample = sample_estimated_csi(stats, cfg, 500)
    v = random_relaxed(rng, stats.irs_size)
    grad = gamma_ub_gradient(v, sample, stats, cfg)
    e = sample.g_hat.conj().T @ v + sample.h_hat
    expected = cfg.powers_watt[0] * np.conj(sample.g_hat @ e) / cfg.noise_watt
    np.testing.assert_allclose(grad, expected, rtol=1e-12)


def test_gradient_scalar_linear_term():
    # scalar surface, real positive coefficients, v = 0: gradient is p0*b/d
    g_hat = np.array([[2.0 + 0.0j]])
    h_hat = np.array([1.5 + 0.0j])
    ratio = UbQuadraticRatio(g_hat=g_hat, h_hat=h_hat, err_const=0.0, p0=3.0,
                             denom_quad=None, denom_const=2.0)
    b = (g_hat @ h_hat)[0]
    grad = ratio.grad(np.zeros(1, dtype=complex))
    assert np.isclose(grad[0], 3.0 * np.conj(b) / 2.0, rtol=1e-14)
    assert grad[0].imag == 0.0


def test_gamma_scale_invariance(small_cfg):
    # doubling all powers and the noise leaves every rate output unchanged
    cfg_a = small_cfg.replace(delta1=0.3, delta2=0.3)
    shift = 10.0 * math.log10(2.0)
    cfg_b = cfg_a.replace(powers_dbm=tuple(p + shift for p in cfg_a.powers_dbm),
                          noise_dbm=cfg_a.noise_dbm + shift)
    stats_a, stats_b = build_statistics(cfg_a), build_statistics(cfg_b)
    rng = np.random.default_rng(15)
    v = random_phase_vector(rng, stats_a.irs_size)
    sample = sample_estimated_csi(stats_a, cfg_a, 600)
    assert np.isclose(gamma_ub(v, sample, stats_a, cfg_a),
                      gamma_ub(v, sample, stats_b, cfg_b), rtol=1e-9)
    assert np.isclose(upper_bound_rate_closed_form(v, stats_a, cfg_a),
                      upper_bound_rate_closed_form(v, stats_b, cfg_b), rtol=1e-9)
    ra = ergodic_rate_mc(v, mrt_policy(v), stats_a, cfg_a, 400, 29, return_samples=True)
    rb = ergodic_rate_mc(v, mrt_policy(v), stats_b, cfg_b, 400, 29, return_samples=True)
    np.testing.assert_allclose(ra.rate_samples, rb.rate_samples, rtol=1e-9)


# ---------------------------------------------------------------------------
# phase-shift vector type
# ---------------------------------------------------------------------------

def test_phase_vector_forms():
    with pytest.raises(ValueError, match="unit modulus"):
        PhaseShiftVector(np.array([0.5 + 0.0j]))
    relaxed = PhaseShiftVector(np.array([0.5 + 0.0j]), form="relaxed")
    assert relaxed.form == "relaxed"
    with pytest.raises(ValueError, match="<= 1"):
        PhaseShiftVector(np.array([1.2 + 0.0j]), form="relaxed")
    with pytest.raises(ValueError, match="unknown form"):
        PhaseShiftVector(np.array([1.0 + 0.0j]), form="loose")
    ones = PhaseShiftVector.ones(4)
    assert len(ones) == 4
    assert np.all(ones.v == 1.0)
    with pytest.raises(ValueError):
        ones.v[0] = 0.0   # frozen array
