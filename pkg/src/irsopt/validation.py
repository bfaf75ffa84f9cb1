"""Operational self-checks: closed forms vs sampling at reduced scale.

These are quick smoke oracles for the `validate-oracles` CLI command, not
the acceptance gate; they use fewer draws and looser tolerances so a full
pass stays under a few seconds.
"""
from __future__ import annotations

import math

import numpy as np

from .channel import ChannelStatistics, PhysicalChannelSampler, build_statistics
from .config import ScenarioConfig
from .beamforming import mrt_policy
from .rate import (
    ergodic_rate_mc,
    gamma_ub,
    gamma_ub_gradient,
    gk,
    phase_array,
    sinr_denominator,
    upper_bound_rate,
    upper_bound_rate_closed_form,
    PhaseShiftVector,
)
from .streams import named_child


def _random_phase(stats: ChannelStatistics, rng) -> PhaseShiftVector:
    return PhaseShiftVector.from_phases(rng.uniform(0, 2 * math.pi, stats.irs_size))


def check_interference_power_oracle(cfg: ScenarioConfig, seed: int,
                                    n_draws: int = 20000, rtol: float = 0.05):
    """gk against the sampled interference power under own-user MRT."""
    stats = build_statistics(cfg)
    if stats.n_bs < 2:
        return True, "no interferers to check"
    rng = named_child(seed, "validate/gk")
    v = _random_phase(stats, rng)
    varr = phase_array(v)
    sampler = PhysicalChannelSampler(stats, named_child(seed, "validate/gk/draws"),
                                     include_interference=True)
    batch = sampler.draw(n_draws)
    worst = 0.0
    for k in range(1, stats.n_bs):
        g, h, h_own = batch.interference[k - 1]
        w = h_own / np.linalg.norm(h_own, axis=1, keepdims=True)
        a = np.einsum("nmi,m->ni", g.conj(), varr) + h
        sampled = float(np.mean(np.abs(np.einsum("ni,ni->n", a.conj(), w)) ** 2))
        closed = gk(v, stats, k)
        worst = max(worst, abs(sampled - closed) / closed)
    return worst < rtol, f"max relative gap {worst:.3%} over {stats.n_bs - 1} interferers"


def check_signal_power_oracle(cfg: ScenarioConfig, seed: int,
                              n_draws: int = 20000, rtol: float = 0.05):
    """Closed-form upper-bound numerator vs the sampled estimate model."""
    stats = build_statistics(cfg)
    rng = named_child(seed, "validate/g0")
    v = _random_phase(stats, rng)
    sampled = upper_bound_rate(v, stats, cfg, n_draws, named_child(seed, "validate/g0/d"))
    closed = upper_bound_rate_closed_form(v, stats, cfg)
    gap = abs(sampled - closed) / max(closed, 1e-30)
    return gap < rtol, f"sampled {sampled:.4f} vs closed form {closed:.4f} bit/s/Hz"


def check_beamformer_optimality(cfg: ScenarioConfig, seed: int,
                                n_random: int = 300):
    """Matched filter beats random unit beamformers on the signal power."""
    from .channel import sample_estimated_csi

    stats = build_statistics(cfg)
    rng = named_child(seed, "validate/bf")
    v = _random_phase(stats, rng)
    sample = sample_estimated_csi(stats, cfg, named_child(seed, "validate/bf/csi"))
    e = sample.g_hat.conj().T @ v.v + sample.h_hat
    best = float(np.real(np.vdot(e, e)))
    m0 = stats.bs_sizes[0]
    w = rng.standard_normal((n_random, m0)) + 1j * rng.standard_normal((n_random, m0))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    rival = float(np.max(np.abs(w.conj() @ e) ** 2))
    return rival <= best * (1 + 1e-12), f"best random {rival:.3e} vs closed form {best:.3e}"


def check_gradient(cfg: ScenarioConfig, seed: int, step: float = 1e-6,
                   rtol: float = 1e-5):
    """Analytic complex gradient vs central finite differences."""
    from .channel import sample_estimated_csi

    stats = build_statistics(cfg)
    rng = named_child(seed, "validate/grad")
    varr = (rng.uniform(0.3, 1.0, stats.irs_size)
            * np.exp(1j * rng.uniform(0, 2 * math.pi, stats.irs_size)))
    sample = sample_estimated_csi(stats, cfg, named_child(seed, "validate/grad/csi"))
    grad = gamma_ub_gradient(varr, sample, stats, cfg)

    fd = np.zeros_like(grad)
    for n in range(varr.shape[0]):
        for direction, weight in ((1.0, 0.5), (1j, -0.5j)):
            plus, minus = varr.copy(), varr.copy()
            plus[n] += step * direction
            minus[n] -= step * direction
            diff = (gamma_ub(plus, sample, stats, cfg)
                    - gamma_ub(minus, sample, stats, cfg)) / (2 * step)
            fd[n] += weight * diff
    err = np.linalg.norm(fd - grad) / np.linalg.norm(grad)
    return err < rtol, f"relative L2 error {err:.2e}"


def check_jensen(cfg: ScenarioConfig, seed: int, n_samples: int = 4000):
    """Upper bound dominates the Monte Carlo rate within sampling noise."""
    stats = build_statistics(cfg)
    rng = named_child(seed, "validate/jensen")
    v = _random_phase(stats, rng)
    report = ergodic_rate_mc(v, mrt_policy(v), stats, cfg, n_samples,
                             named_child(seed, "validate/jensen/mc"))
    ok = report.ub_rate >= report.mc_rate - 3 * report.mc_stderr
    gap = (report.ub_rate - report.mc_rate) / max(report.ub_rate, 1e-30)
    return ok, f"ub {report.ub_rate:.4f}, mc {report.mc_rate:.4f} (gap {gap:.2%})"


def check_denominator_consistency(cfg: ScenarioConfig, seed: int):
    """Quadratic-form denominator equals the gk sum."""
    from .rate import interference_quadratic

    stats = build_statistics(cfg)
    rng = named_child(seed, "validate/den")
    v = phase_array(_random_phase(stats, rng))
    quad, const = interference_quadratic(stats, cfg)
    via_quad = const + (0.0 if quad is None else float(np.real(v.conj() @ quad @ v)))
    via_sum = sinr_denominator(v, stats, cfg)
    gap = abs(via_quad - via_sum) / via_sum
    return gap < 1e-10, f"relative gap {gap:.2e}"


ALL_CHECKS = (
    ("interference-power-oracle", check_interference_power_oracle),
    ("signal-power-oracle", check_signal_power_oracle),
    ("beamformer-optimality", check_beamformer_optimality),
    ("gradient-finite-difference", check_gradient),
    ("jensen-dominance", check_jensen),
    ("denominator-consistency", check_denominator_consistency),
)


def run_validation(cfg: ScenarioConfig, seed: int = 0) -> bool:
    """Run every check, print one PASS/FAIL line each, return overall result."""
    all_ok = True
    for name, check in ALL_CHECKS:
        try:
            ok, detail = check(cfg, seed)
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        print(f"  {'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
