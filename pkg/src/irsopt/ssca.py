"""Stochastic successive convex approximation for the quasi-static phase
shifts.

Each iteration t draws L estimated-CSI samples, refreshes running averages
of the sampled objective value and its ascent gradient,

    c0 <- rho_t * mean_l gamma(v, sample_l) + (1 - rho_t) * c0
    c1 <- rho_t * mean_l conj(d gamma / d v)(v, sample_l) + (1 - rho_t) * c1

and maximizes the strongly concave separable surrogate

    f(u) = c0 + 2 Re{(u - v)^H c1} - tau * ||u - v||^2,   |u_n| <= 1,

whose per-coordinate maximizer on the active constraint is

    u_n = (tau * v_n + c1_n) / |tau * v_n + c1_n|.

The iterate then moves by a convex combination v <- (1-w_t) v + w_t u.
Stepsizes rho_t = t^-a and w_t = t^-b with 0.5 < a < b <= 1 satisfy the
usual diminishing/summability conditions and w_t/rho_t -> 0.  Iterates
live in the relaxed set |v_n| <= 1; the deployed configuration is the
unit-modulus projection of the final iterate.

`c1` stores the conjugate (ascent) form of the sampled gradient, which is
what makes the closed-form surrogate maximizer an ascent step; the plain
derivative convention used by `rate.gamma_ub_gradient` is its conjugate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelStatistics, CsiSample
from .config import ScenarioConfig
from .rate import (
    PhaseShiftVector,
    PhaseLike,
    UbQuadraticRatio,
    error_power_constant,
    interference_quadratic,
    phase_array,
    upper_bound_rate_closed_form,
)
from .streams import crandn, named_child, named_children


def stepsize_rho(t: int, a: float) -> float:
    """Coefficient-averaging stepsize t^-a; needs sum rho = inf and
    sum rho^2 < inf, hence a in (0.5, 1]."""
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    return float(t) ** (-a)


def stepsize_omega(t: int, b: float) -> float:
    """Iterate-averaging stepsize t^-b with b > a so that omega/rho -> 0."""
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    return float(t) ** (-b)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the stochastic solver.

    tau_reg = None auto-calibrates the proximal weight from the first
    iteration's gradient sample (1e-2 times its mean entry magnitude), so
    the proximal term stays comparable to the linear term across the wide
    dynamic range of channel gains.
    """

    iterations: int = 500               # T
    samples_per_iter: int = 10          # L
    tau_reg: Optional[float] = None     # surrogate concavity weight
    rho_exponent: float = 0.6           # a in (0.5, 1]
    omega_exponent: float = 0.9         # b in (a, 1]
    seed: int = 0
    tolerance: float = 0.0              # fixed-point gap early stop; 0 = run all T
    probe_every: int = 0                # UB-rate probe period in the trace; 0 = off
    deploy_surrogate_point: bool = False  # deploy last surrogate maximizer instead
                                          # of the projected averaged iterate

    def __post_init__(self):
        if self.iterations < 1 or self.samples_per_iter < 1:
            raise ValueError("iterations and samples_per_iter must be >= 1")
        a, b = self.rho_exponent, self.omega_exponent
        if not (0.5 < a <= 1.0):
            raise ValueError(f"rho exponent must lie in (0.5, 1], got {a}")
        if not (a < b <= 1.0):
            raise ValueError(f"omega exponent must lie in ({a}, 1], got {b}")
        if self.tau_reg is not None and not self.tau_reg > 0:
            raise ValueError(f"tau_reg must be positive, got {self.tau_reg}")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SscaState:
    """Solver iterate after iteration t (t = 0 is the initial point)."""

    t: int
    v: np.ndarray               # relaxed iterate, |v_n| <= 1
    c0: float                   # running objective average
    c1: np.ndarray              # running ascent-gradient average

    def __post_init__(self):
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        c1 = np.asarray(self.c1, dtype=complex).reshape(-1)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "c1", c1)
        if np.max(np.abs(v)) > 1.0 + 1e-12:
            raise ValueError("iterate leaves the relaxed set |v_n| <= 1")

    @classmethod
    def initial(cls, v0: np.ndarray) -> "SscaState":
        v0 = np.asarray(v0, dtype=complex).reshape(-1)
        return cls(t=0, v=v0, c0=0.0, c1=np.zeros(v0.shape[0], dtype=complex))


# ---------------------------------------------------------------------------
# Design objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignObjective:
    """What the solver optimizes: the sampling law of the estimated CSI and
    the coefficients of the per-sample quadratic ratio.

    Baselines reuse this with modified ingredients: a non-robust design
    zeroes the error terms (full-variance sampling, no error constant), a
    design that ignores interference drops the denominator terms.  The
    mean fields allow degenerate (deterministic) sampling laws for
    small-instance validation.
    """

    p0: float
    g_mean: np.ndarray                  # (Mr, M0)
    g_var: float                        # per-element estimate variance
    h_mean: np.ndarray                  # (M0,)
    h_var: float
    err_const: float
    denom_quad: Optional[np.ndarray]    # (Mr, Mr) or None
    denom_const: float

    @classmethod
    def from_scenario(cls, stats: ChannelStatistics, cfg: ScenarioConfig,
                      robust: bool = True,
                      include_interference: bool = True) -> "DesignObjective":
        if robust:
            g_var = stats.estimate_g_var
            h_var = stats.estimate_h_var
            err_const = error_power_constant(stats.irs_size, stats.delta1_abs,
                                             stats.delta2_abs)
        else:
            g_var = float(stats.sigma_g_sq[0])
            h_var = stats.sigma_h_sq
            err_const = 0.0
        if include_interference:
            quad, const = interference_quadratic(stats, cfg)
        else:
            quad, const = None, cfg.noise_watt
        return cls(
            p0=cfg.powers_watt[0],
            g_mean=stats.cascaded_los[0],
            g_var=max(g_var, 0.0),
            h_mean=np.zeros(stats.bs_sizes[0], dtype=complex),
            h_var=max(h_var, 0.0),
            err_const=err_const,
            denom_quad=quad,
            denom_const=const,
        )

    @property
    def irs_size(self) -> int:
        return self.g_mean.shape[0]

    def sample(self, streams: dict, n: int) -> list[CsiSample]:
        """Draw n estimated-CSI samples from the design's Gaussian law."""
        shape_g = (n,) + self.g_mean.shape
        g = self.g_mean[None] + crandn(streams["design/g"], shape_g, self.g_var)
        h = self.h_mean[None] + crandn(streams["design/h"], (n, self.h_mean.shape[0]),
                                       self.h_var)
        return [CsiSample(g_hat=g[i], h_hat=h[i]) for i in range(n)]

    def ratio(self, sample: CsiSample) -> UbQuadraticRatio:
        return UbQuadraticRatio(
            g_hat=sample.g_hat,
            h_hat=sample.h_hat,
            err_const=self.err_const,
            p0=self.p0,
            denom_quad=self.denom_quad,
            denom_const=self.denom_const,
        )


# ---------------------------------------------------------------------------
# Algorithm steps
# ---------------------------------------------------------------------------

def update_coefficients(state: SscaState, samples: Sequence[CsiSample], rho: float,
                        design: DesignObjective) -> SscaState:
    """Blend the sample means of the objective and its ascent gradient,
    both evaluated at the previous iterate, into the running averages."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if len(samples) == 0:
        raise ValueError("at least one sample per iteration is required")
    vals = []
    grads = np.zeros_like(state.c1)
    for sample in samples:
        ratio = design.ratio(sample)
        vals.append(ratio.value(state.v))
        grads += ratio.ascent(state.v)
    mean_val = float(np.mean(vals))
    mean_grad = grads / len(samples)
    return replace(
        state,
        c0=rho * mean_val + (1.0 - rho) * state.c0,
        c1=rho * mean_grad + (1.0 - rho) * state.c1,
    )


def solve_surrogate(state: SscaState, tau_reg: float) -> np.ndarray:
    """Closed-form maximizer of the surrogate over |u_n| <= 1: the phase of
    tau * v_n + c1_n per coordinate.  Zero directions keep the previous
    phase (or 1 when the previous entry is zero too)."""
    if not tau_reg > 0:
        raise ValueError(f"tau_reg must be positive, got {tau_reg}")
    direction = tau_reg * state.v + state.c1
    mod = np.abs(direction)
    dead = mod == 0.0
    if np.any(dead):
        direction = direction.copy()
        prev = state.v[dead]
        prev_mod = np.abs(prev)
        direction[dead] = np.where(prev_mod > 0, prev, 1.0)
        mod = np.abs(direction)
    return direction / mod


def surrogate_value(u: PhaseLike, state: SscaState, tau_reg: float) -> float:
    """f(u) = c0 + 2 Re{(u - v)^H c1} - tau * ||u - v||^2 around the
    state's iterate (audit/verification helper)."""
    du = phase_array(u) - state.v
    linear = 2.0 * float(np.real(np.vdot(du, state.c1)))
    return state.c0 + linear - tau_reg * float(np.real(np.vdot(du, du)))


def advance_iterate(state: SscaState, v_bar: np.ndarray, omega: float) -> SscaState:
    """v <- (1 - omega) v + omega v_bar; stays inside |v_n| <= 1."""
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    return replace(state, v=(1.0 - omega) * state.v + omega * np.asarray(v_bar))


def project_unit_modulus(v: PhaseLike) -> PhaseShiftVector:
    """Entry-wise projection v_n / |v_n| onto the deployment set; zero
    entries map to 1."""
    varr = phase_array(v).copy()
    mod = np.abs(varr)
    varr[mod == 0.0] = 1.0
    mod = np.abs(varr)
    return PhaseShiftVector(varr / mod, form="deployment")


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class SscaTrace:
    """Per-iteration diagnostics: running objective average, fixed-point gap
    ||v_bar - v_prev||, and an optional UB-rate probe."""

    t: list[int] = field(default_factory=list)
    c0: list[float] = field(default_factory=list)
    gap: list[float] = field(default_factory=list)
    ub_rate: list[float] = field(default_factory=list)     # NaN when not probed
    audit: list[dict] = field(default_factory=list)        # filled when requested

    def append(self, t: int, c0: float, gap: float, ub_rate: float = math.nan):
        self.t.append(t)
        self.c0.append(c0)
        self.gap.append(gap)
        self.ub_rate.append(ub_rate)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "c0", "fixed_point_gap", "ub_rate_probe"])
            for i in range(len(self.t)):
                probe = "" if math.isnan(self.ub_rate[i]) else repr(self.ub_rate[i])
                writer.writerow([self.t[i], repr(self.c0[i]), repr(self.gap[i]), probe])


@dataclass(frozen=True)
class SscaResult:
    v: PhaseShiftVector         # deployment-form design
    trace: SscaTrace
    state: SscaState            # final relaxed iterate
    tau_reg: float              # proximal weight actually used


def _auto_tau(c1: np.ndarray) -> float:
    """1e-2 times the mean gradient entry magnitude, floored away from zero."""
    scale = float(np.mean(np.abs(c1)))
    if scale <= 0.0 or not math.isfinite(scale):
        return 1e-12
    return 1e-2 * scale


def run(solver_cfg: SolverConfig, stats: ChannelStatistics, cfg: ScenarioConfig,
        design: Optional[DesignObjective] = None,
        v0: Optional[PhaseLike] = None,
        audit: bool = False) -> SscaResult:
    """Run the full stochastic solver and return the deployable design.

    Per-iteration cost is O(L * M0 * Mr) (sampling, objective and gradient
    are all linear in the channel matrix size).  Identical configurations
    and seeds reproduce the iterates bit-for-bit.
    """
    if design is None:
        design = DesignObjective.from_scenario(stats, cfg)
    mr = design.irs_size
    v_init = np.ones(mr, dtype=complex) if v0 is None else phase_array(v0).copy()
    state = SscaState.initial(v_init)

    streams = named_children(named_child(solver_cfg.seed, "solver"),
                             ["design/g", "design/h"])
    tau_reg = solver_cfg.tau_reg
    trace = SscaTrace()
    v_bar = state.v

    for t in range(1, solver_cfg.iterations + 1):
        samples = design.sample(streams, solver_cfg.samples_per_iter)
        rho = stepsize_rho(t, solver_cfg.rho_exponent)
        state = replace(state, t=t)
        state = update_coefficients(state, samples, rho, design)
        if tau_reg is None:
            tau_reg = _auto_tau(state.c1)
        v_prev = state.v
        v_bar = solve_surrogate(state, tau_reg)
        gap = float(np.linalg.norm(v_bar - v_prev))
        if audit:
            trace.audit.append({
                "t": t, "v_prev": v_prev.copy(), "c0": state.c0,
                "c1": state.c1.copy(), "tau_reg": tau_reg, "v_bar": v_bar.copy(),
            })
        state = advance_iterate(state, v_bar, stepsize_omega(t, solver_cfg.omega_exponent))

        probe = math.nan
        if solver_cfg.probe_every and t % solver_cfg.probe_every == 0:
            probe = upper_bound_rate_closed_form(project_unit_modulus(state.v), stats, cfg)
        trace.append(t, state.c0, gap, probe)

        if solver_cfg.tolerance > 0.0 and gap < solver_cfg.tolerance:
            break

    if solver_cfg.deploy_surrogate_point:
        v_out = PhaseShiftVector(v_bar, form="deployment")
    else:
        v_out = project_unit_modulus(state.v)
    return SscaResult(v=v_out, trace=trace, state=state, tau_reg=float(tau_reg))
