"""Rate expressions: expected signal/interference powers, the closed-form
upper-bound rate, the Monte Carlo ergodic rate, and the per-sample
objective ratio with its complex gradient.

Core quantities, for phase shifts v, unit beamformer w and one CSI draw
(g_hat, h_hat):

    g0 = |(v^H g_hat + h_hat^H) w|^2 + delta2^2 + Mr*delta1^2
    gk = ||v^H glos_k||^2 / Mk + a_kr*a_ru*Mr*(1 - tau_k) + a_k0   (k >= 1)

g0 is the conditional expectation over the CSI error of the received
signal power; gk is the exact expectation of interferer k's power under
maximum-ratio transmission towards its own user.  With the matched-filter
beamformer substituted, g0's signal term becomes ||g_hat^H v + h_hat||^2
and the per-sample objective is a ratio of Hermitian quadratic forms

    gamma(v) = p0 * (v^H A v + 2 Re{v^H b} + c) / (v^H B v + d)

with A = g_hat g_hat^H, b = g_hat h_hat, c = ||h_hat||^2 + delta2^2 +
Mr*delta1^2, B = sum_k (p_k/Mk) glos_k glos_k^H and d collecting the
v-independent interference and noise terms.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .channel import ChannelStatistics, CsiSample, PhysicalChannelSampler
from .config import ScenarioConfig
from .streams import RngLike

DEPLOYMENT = "deployment"
RELAXED = "relaxed"

_MC_CHUNK = 512


@dataclass(frozen=True)
class PhaseShiftVector:
    """IRS configuration.  Deployment form has unit-modulus entries;
    relaxed form (solver-internal) only requires |v_n| <= 1."""

    v: np.ndarray
    form: str = DEPLOYMENT

    def __post_init__(self):
        arr = np.array(self.v, dtype=complex, copy=True).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "v", arr)
        if self.form not in (DEPLOYMENT, RELAXED):
            raise ValueError(f"unknown form {self.form!r}")
        mod = np.abs(arr)
        if self.form == DEPLOYMENT:
            if np.max(np.abs(mod - 1.0)) > 1e-9:
                raise ValueError("deployment-form entries must have unit modulus")
        elif np.max(mod) > 1.0 + 1e-12:
            raise ValueError("relaxed-form entries must satisfy |v_n| <= 1")

    @classmethod
    def ones(cls, n: int) -> "PhaseShiftVector":
        return cls(np.ones(n, dtype=complex), DEPLOYMENT)

    @classmethod
    def from_phases(cls, phases: np.ndarray) -> "PhaseShiftVector":
        return cls(np.exp(1j * np.asarray(phases, dtype=float)), DEPLOYMENT)

    def __len__(self) -> int:
        return self.v.shape[0]


PhaseLike = Union[PhaseShiftVector, np.ndarray, Sequence[complex]]


def phase_array(v: PhaseLike) -> np.ndarray:
    """Unwrap a PhaseShiftVector (or accept a raw vector) as a 1-D complex array."""
    if isinstance(v, PhaseShiftVector):
        return v.v
    return np.asarray(v, dtype=complex).reshape(-1)


def _beam_array(w) -> np.ndarray:
    arr = getattr(w, "w", w)
    arr = np.asarray(arr, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(arr)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"beamformer must be unit-norm, got ||w|| = {nrm}")
    return arr


@dataclass(frozen=True)
class RateReport:
    """Evaluation result for one (scheme, scenario) pair."""

    ub_rate: float                      # bit/s/Hz, closed-form upper bound
    mc_rate: float                      # bit/s/Hz, Monte Carlo ergodic estimate
    mc_stderr: float
    n_samples: int
    signal_power: float                 # p0 * E|signal|^2, linear watts
    interference_power: tuple[float, ...]   # p_k * gk per interferer
    noise_power: float
    rate_samples: Optional[np.ndarray] = None   # per-sample rates when requested

    def __post_init__(self):
        if self.mc_stderr < 0:
            raise ValueError("standard error must be non-negative")
        if self.signal_power < 0 or self.noise_power < 0 or any(
                p < 0 for p in self.interference_power):
            raise ValueError("power breakdown terms must be non-negative")

    def to_dict(self) -> dict:
        return {
            "ub_rate": self.ub_rate,
            "mc_rate": self.mc_rate,
            "mc_stderr": self.mc_stderr,
            "n_samples": self.n_samples,
            "signal_power": self.signal_power,
            "interference_power": list(self.interference_power),
            "noise_power": self.noise_power,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


# ---------------------------------------------------------------------------
# Expected powers
# ---------------------------------------------------------------------------

def error_power_constant(irs_size: int, delta1: float, delta2: float) -> float:
    """delta2^2 + Mr*delta1^2, the CSI-error part of the signal power.

    Exact for unit-modulus v (||v||^2 = Mr); kept constant for relaxed v."""
    return delta2 ** 2 + irs_size * delta1 ** 2


def g0(v: PhaseLike, w, sample: CsiSample, delta1: float, delta2: float) -> float:
    """Expected received signal power for one estimated-CSI draw:
    |(v^H g_hat + h_hat^H) w|^2 + delta2^2 + Mr*delta1^2."""
    varr = phase_array(v)
    warr = _beam_array(w)
    if sample.g_hat.shape != (varr.shape[0], warr.shape[0]):
        raise ValueError(
            f"dimension mismatch: g_hat {sample.g_hat.shape}, "
            f"v {varr.shape[0]}, w {warr.shape[0]}"
        )
    equivalent = sample.g_hat.conj().T @ varr + sample.h_hat    # (M0,)
    signal = np.abs(np.vdot(equivalent, warr)) ** 2
    return float(signal + error_power_constant(varr.shape[0], delta1, delta2))


def gk(v: PhaseLike, stats: ChannelStatistics, k: int) -> float:
    """Expected interference power from BS k under own-user MRT:
    ||v^H glos_k||^2 / Mk + a_kr*a_ru*Mr*(1 - tau_k) + a_k0."""
    if k == 0:
        raise ValueError("k = 0 is the serving link; use g0")
    if not 1 <= k < stats.n_bs:
        raise ValueError(f"interferer index {k} out of range (1..{stats.n_bs - 1})")
    varr = phase_array(v)
    los_term = np.linalg.norm(varr.conj() @ stats.cascaded_los[k]) ** 2 / stats.bs_sizes[k]
    nlos_term = (stats.alpha_bs_irs[k] * stats.alpha_irs_user
                 * stats.irs_size * (1.0 - stats.tau[k]))
    return float(los_term + nlos_term + stats.alpha_direct[k])


def sinr_denominator(v: PhaseLike, stats: ChannelStatistics, cfg: ScenarioConfig) -> float:
    """Interference-plus-noise power sum_k p_k * gk(v) + sigma^2."""
    powers = cfg.powers_watt
    total = cfg.noise_watt
    for k in range(1, stats.n_bs):
        total += powers[k] * gk(v, stats, k)
    return float(total)


def interference_quadratic(stats: ChannelStatistics,
                           cfg: ScenarioConfig) -> tuple[Optional[np.ndarray], float]:
    """Denominator as a quadratic form: (B, d) with
    sinr_denominator(v) = v^H B v + d.  B is None when there are no
    interferers with a LoS component (pure constant denominator)."""
    powers = cfg.powers_watt
    d = cfg.noise_watt
    quad = None
    for k in range(1, stats.n_bs):
        d += powers[k] * (stats.alpha_bs_irs[k] * stats.alpha_irs_user
                          * stats.irs_size * (1.0 - stats.tau[k])
                          + stats.alpha_direct[k])
        glos = stats.cascaded_los[k]
        if stats.tau[k] > 0:
            contrib = (powers[k] / stats.bs_sizes[k]) * (glos @ glos.conj().T)
            quad = contrib if quad is None else quad + contrib
    return quad, float(d)


# ---------------------------------------------------------------------------
# Quadratic-ratio objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UbQuadraticRatio:
    """gamma(v) = p0*(||g_hat^H v + h_hat||^2 + err_const) / (v^H B v + d)
    for one CSI draw.  `grad` is the formal derivative d gamma / d v_n
    (conjugate coordinates held fixed), so that
    gamma(v + dv) ~ gamma(v) + 2 Re{sum_n grad_n dv_n}; `ascent` is its
    conjugate, the steepest-ascent direction."""

    g_hat: np.ndarray                   # (Mr, M0)
    h_hat: np.ndarray                   # (M0,)
    err_const: float
    p0: float
    denom_quad: Optional[np.ndarray]    # (Mr, Mr) Hermitian PSD or None
    denom_const: float

    def equivalent_channel(self, v: np.ndarray) -> np.ndarray:
        """g_hat^H v + h_hat, the estimated combined downlink channel."""
        return self.g_hat.conj().T @ v + self.h_hat

    def _denominator(self, v: np.ndarray) -> float:
        if self.denom_quad is None:
            return self.denom_const
        return float(np.real(v.conj() @ self.denom_quad @ v)) + self.denom_const

    def value(self, v: PhaseLike) -> float:
        varr = phase_array(v)
        e = self.equivalent_channel(varr)
        num = self.p0 * (float(np.real(np.vdot(e, e))) + self.err_const)
        return num / self._denominator(varr)

    def grad(self, v: PhaseLike) -> np.ndarray:
        varr = phase_array(v)
        e = self.equivalent_channel(varr)
        den = self._denominator(varr)
        num = self.p0 * (float(np.real(np.vdot(e, e))) + self.err_const)
        # d(num)/dv_n = p0 * conj(A v + b)_n with A v + b = g_hat e
        num_grad = self.p0 * np.conj(self.g_hat @ e)
        if self.denom_quad is None:
            return num_grad / den
        den_grad = np.conj(self.denom_quad @ varr)
        return (num_grad * den - num * den_grad) / den ** 2

    def ascent(self, v: PhaseLike) -> np.ndarray:
        """conj(grad): moving along this direction increases gamma."""
        return np.conj(self.grad(v))


def _ratio_from_model(sample: CsiSample, stats: ChannelStatistics,
                      cfg: ScenarioConfig) -> UbQuadraticRatio:
    quad, const = interference_quadratic(stats, cfg)
    return UbQuadraticRatio(
        g_hat=sample.g_hat,
        h_hat=sample.h_hat,
        err_const=error_power_constant(stats.irs_size, stats.delta1_abs, stats.delta2_abs),
        p0=cfg.powers_watt[0],
        denom_quad=quad,
        denom_const=const,
    )


def gamma_ub(v: PhaseLike, sample: CsiSample, stats: ChannelStatistics,
             cfg: ScenarioConfig) -> float:
    """Per-sample objective: p0 * g0 at the matched-filter beamformer over
    the interference-plus-noise power."""
    return _ratio_from_model(sample, stats, cfg).value(v)


def gamma_ub_gradient(v: PhaseLike, sample: CsiSample, stats: ChannelStatistics,
                      cfg: ScenarioConfig) -> np.ndarray:
    """Formal complex derivative of gamma_ub per coordinate (see
    UbQuadraticRatio.grad for the convention)."""
    return _ratio_from_model(sample, stats, cfg).grad(v)


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def expected_signal_power_closed_form(v: PhaseLike, stats: ChannelStatistics) -> float:
    """E ||g_hat^H v + h_hat||^2 under the Gaussian CSI model:
    ||glos_0^H v||^2 + M0*(Mr*(sigma_g^2 - delta1^2) + sigma_h^2 - delta2^2).

    Assumes deployment-form v (||v||^2 = Mr)."""
    varr = phase_array(v)
    m0 = stats.bs_sizes[0]
    los = np.linalg.norm(stats.cascaded_los[0].conj().T @ varr) ** 2
    return float(los + m0 * (stats.irs_size * stats.estimate_g_var + stats.estimate_h_var))


def upper_bound_rate_closed_form(v: PhaseLike, stats: ChannelStatistics,
                                 cfg: ScenarioConfig) -> float:
    """log2(1 + p0 * E[g0 at the matched-filter beamformer] / denominator)
    with the expectation in closed form."""
    signal = expected_signal_power_closed_form(v, stats)
    signal += error_power_constant(stats.irs_size, stats.delta1_abs, stats.delta2_abs)
    return math.log2(1.0 + cfg.powers_watt[0] * signal / sinr_denominator(v, stats, cfg))


def upper_bound_rate(v: PhaseLike, stats: ChannelStatistics, cfg: ScenarioConfig,
                     n_samples: int, rng: RngLike) -> float:
    """Upper-bound rate with E[g0] estimated by Monte Carlo over the
    Gaussian CSI model (cross-check: upper_bound_rate_closed_form)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    from .channel import EstimatedCsiSampler  # local to avoid import cycle noise

    varr = phase_array(v)
    sampler = EstimatedCsiSampler(stats, rng)
    total = 0.0
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        g_hat, h_hat = sampler.draw(m)
        e = np.einsum("nmi,m->ni", g_hat.conj(), varr) + h_hat
        total += float(np.sum(np.real(np.einsum("ni,ni->n", e.conj(), e))))
        done += m
    mean_signal = total / n_samples
    mean_signal += error_power_constant(stats.irs_size, stats.delta1_abs, stats.delta2_abs)
    return math.log2(1.0 + cfg.powers_watt[0] * mean_signal / sinr_denominator(v, stats, cfg))


BeamformingPolicy = Callable[[np.ndarray, np.ndarray], np.ndarray]


def ergodic_rate_mc(v: PhaseLike, policy: BeamformingPolicy, stats: ChannelStatistics,
                    cfg: ScenarioConfig, n_samples: int, rng: RngLike,
                    return_samples: bool = False) -> RateReport:
    """Monte Carlo ergodic rate under physically sampled channels.

    The beamforming policy maps batched estimated CSI (g_hat (n,Mr,M0),
    h_hat (n,M0)) to unit-norm rows (n,M0).  The signal term uses the true
    channels; the interference-plus-noise term uses its exact expectation
    (sinr_denominator), per the worst-case-noise reading of the rate.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    varr = phase_array(v)
    den = sinr_denominator(varr, stats, cfg)
    p0 = cfg.powers_watt[0]

    sampler = PhysicalChannelSampler(stats, rng, include_interference=False)
    rates = np.empty(n_samples)
    signal_sum = 0.0
    done = 0
    while done < n_samples:
        m = min(_MC_CHUNK, n_samples - done)
        batch = sampler.draw(m)
        w = policy(batch.g_hat, batch.h_hat)                      # (m, M0)
        x = np.einsum("nmi,m->ni", batch.g_true.conj(), varr) + batch.h_true
        signal = np.abs(np.einsum("ni,ni->n", x.conj(), w)) ** 2
        signal_sum += float(np.sum(signal))
        rates[done:done + m] = np.log2(1.0 + p0 * signal / den)
        done += m

    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    report = RateReport(
        ub_rate=upper_bound_rate_closed_form(varr, stats, cfg),
        mc_rate=mean,
        mc_stderr=stderr,
        n_samples=n_samples,
        signal_power=p0 * signal_sum / n_samples,
        interference_power=tuple(
            cfg.powers_watt[k] * gk(varr, stats, k) for k in range(1, stats.n_bs)
        ),
        noise_power=cfg.noise_watt,
        rate_samples=rates if return_samples else None,
    )
    return report
