"""Comparison schemes: the proposed joint design and four ablations.

Every scheme pairs a quasi-static phase-shift design with the per-slot
matched-filter beamformer.  The flags only change the *design* objective:

* non-robust variants design as if the CSI were perfect (full-variance
  sampling, no error constants),
* without-interference variants drop the interference terms from the
  design denominator,
* the random-phase scheme skips the joint optimization entirely and is
  averaged over several independent phase draws.

Evaluation is always the same: true error variances, full interference,
identical Monte Carlo seeds and sample counts for every scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .beamforming import mrt_policy
from .channel import ChannelStatistics
from .config import ScenarioConfig
from .rate import BeamformingPolicy, PhaseShiftVector, RateReport, ergodic_rate_mc
from .ssca import DesignObjective, SolverConfig
from .ssca import run as run_ssca
from .streams import RngLike, named_child

PHASE_SOURCE_SSCA = "ssca"
PHASE_SOURCE_RANDOM = "random"


@dataclass(frozen=True)
class SchemeSpec:
    """How one scheme builds its phase shifts and design objective."""

    name: str
    robust: bool                    # account for the CSI error in the design
    use_interference: bool          # keep interference terms in the design denominator
    phase_source: str = PHASE_SOURCE_SSCA
    phase_draws: int = 1            # independent draws to average (random source)

    def __post_init__(self):
        if self.phase_source not in (PHASE_SOURCE_SSCA, PHASE_SOURCE_RANDOM):
            raise ValueError(f"unknown phase source {self.phase_source!r}")
        if self.phase_draws < 1:
            raise ValueError("phase_draws must be >= 1")


SCHEMES: dict[str, SchemeSpec] = {
    spec.name: spec
    for spec in (
        SchemeSpec("proposed", robust=True, use_interference=True),
        SchemeSpec("robust-with-intf", robust=True, use_interference=True,
                   phase_source=PHASE_SOURCE_RANDOM, phase_draws=10),
        SchemeSpec("robust-no-intf", robust=True, use_interference=False),
        SchemeSpec("nonrobust-with-intf", robust=False, use_interference=True),
        SchemeSpec("nonrobust-no-intf", robust=False, use_interference=False),
    )
}


def scheme(name: str) -> SchemeSpec:
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


def design_scheme(spec: SchemeSpec, stats: ChannelStatistics, cfg: ScenarioConfig,
                  solver_cfg: SolverConfig, draw: int = 0
                  ) -> tuple[PhaseShiftVector, BeamformingPolicy]:
    """Produce the scheme's (phase shifts, beamforming policy) pair.

    `draw` indexes independent designs for schemes that average over
    several phase draws; deterministic given (solver seed, scheme, draw).
    """
    if spec.phase_source == PHASE_SOURCE_RANDOM:
        rng = named_child(solver_cfg.seed, f"phases/{spec.name}/{draw}")
        phases = rng.uniform(0.0, 2.0 * math.pi, stats.irs_size)
        v = PhaseShiftVector.from_phases(phases)
    else:
        design = DesignObjective.from_scenario(
            stats, cfg, robust=spec.robust, include_interference=spec.use_interference)
        result = run_ssca(solver_cfg, stats, cfg, design=design)
        v = result.v
    return v, mrt_policy(v)


def evaluate_scheme(spec: SchemeSpec, stats: ChannelStatistics, cfg: ScenarioConfig,
                    solver_cfg: SolverConfig, n_samples: int, eval_rng: RngLike,
                    return_samples: bool = False) -> RateReport:
    """Design the scheme and evaluate it under the true imperfect-CSI,
    with-interference channel model.

    Multi-draw schemes share the evaluation channel draws across designs
    (identical eval_rng), so the average is a paired average.
    """
    per_draw = []
    for draw in range(spec.phase_draws):
        v, policy = design_scheme(spec, stats, cfg, solver_cfg, draw=draw)
        per_draw.append(
            ergodic_rate_mc(v, policy, stats, cfg, n_samples, eval_rng,
                            return_samples=True)
        )
    if len(per_draw) == 1:
        report = per_draw[0]
        if not return_samples:
            report = replace(report, rate_samples=None)
        return report

    # average per-sample rates across draws, then summarize
    samples = np.mean([r.rate_samples for r in per_draw], axis=0)
    stderr = float(np.std(samples, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return RateReport(
        ub_rate=float(np.mean([r.ub_rate for r in per_draw])),
        mc_rate=float(np.mean(samples)),
        mc_stderr=stderr,
        n_samples=n_samples,
        signal_power=float(np.mean([r.signal_power for r in per_draw])),
        interference_power=per_draw[0].interference_power,
        noise_power=per_draw[0].noise_power,
        rate_samples=samples if return_samples else None,
    )
