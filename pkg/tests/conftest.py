import math

import numpy as np
import pytest

import irsopt


def random_scenario(rng: np.random.Generator, name: str = "rand",
                    max_interferers: int = 2, max_irs_side: int = 4,
                    max_delta: float = 0.9) -> irsopt.ScenarioConfig:
    """Small random but valid scenario for property and oracle tests."""
    n_int = int(rng.integers(1, max_interferers + 1))

    def pos(radius_lo, radius_hi):
        r = rng.uniform(radius_lo, radius_hi)
        a = rng.uniform(0, 2 * math.pi)
        return (r * math.cos(a), r * math.sin(a))

    irs_side = int(rng.integers(2, max_irs_side + 1))
    return irsopt.ScenarioConfig(
        name=name,
        bs_positions=tuple([(0.0, 0.0)] + [pos(300, 800) for _ in range(n_int)]),
        irs_position=pos(50, 300),
        user_position=pos(100, 400),
        bs_grids=((2, 2),) * (n_int + 1),
        irs_grid=(irs_side, irs_side),
        powers_dbm=tuple(rng.uniform(25, 33) for _ in range(n_int + 1)),
        noise_dbm=rng.uniform(-95, -85),
        rician_bs_irs=tuple(rng.uniform(0, 10) for _ in range(n_int + 1)),
        rician_irs_user=rng.uniform(0, 10),
        exp_direct=rng.uniform(3.0, 4.0),
        exp_bs_irs=rng.uniform(2.0, 2.5),
        exp_irs_user=rng.uniform(2.5, 3.5),
        angles_bs_irs=tuple((rng.uniform(0, math.pi / 2), rng.uniform(0, math.pi / 2))
                            for _ in range(n_int + 1)),
        angles_irs_user=(rng.uniform(0, math.pi / 2), rng.uniform(0, math.pi / 2)),
        delta1=rng.uniform(0, max_delta),
        delta2=rng.uniform(0, max_delta),
        error_units="normalized",
    )


def random_phase_vector(rng: np.random.Generator, n: int) -> irsopt.PhaseShiftVector:
    return irsopt.PhaseShiftVector.from_phases(rng.uniform(0, 2 * math.pi, n))


def random_relaxed(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random point of the relaxed feasible set, bounded away from zero."""
    return (rng.uniform(0.2, 1.0, n)
            * np.exp(1j * rng.uniform(0, 2 * math.pi, n)))


def random_unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    w = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def paired_t(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    """(mean difference, its standard error, t statistic) for paired samples."""
    d = np.asarray(a) - np.asarray(b)
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / math.sqrt(d.shape[0]))
    return mean, se, mean / se if se > 0 else math.inf * np.sign(mean or 1.0)


@pytest.fixture(scope="session")
def preset_cfg():
    return irsopt.load_scenario("paper-fig3")


@pytest.fixture(scope="session")
def preset_stats(preset_cfg):
    return irsopt.build_statistics(preset_cfg)


@pytest.fixture(scope="session")
def small_cfg():
    """Preset geometry shrunk to small arrays for cheap per-sample math."""
    cfg = irsopt.load_scenario("paper-fig3")
    return cfg.replace(bs_grids=((2, 2),) * 3, irs_grid=(3, 3), name="small")


@pytest.fixture(scope="session")
def small_stats(small_cfg):
    return irsopt.build_statistics(small_cfg)
