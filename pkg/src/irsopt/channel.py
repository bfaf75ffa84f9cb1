"""Channel statistics and sampling for the IRS-assisted downlink.

Model summary
-------------
BS->IRS and IRS->user links are Rician: a deterministic unit-modulus LoS
matrix mixed with i.i.d. CN(0,1) scattering, weighted by the Rician factor.
BS->user links are Rayleigh.  The cascaded BS k -> IRS -> user channel is

    G_k = diag(conj(h_ru)) H_kr            # (Mr, Mk)

whose LoS component is sqrt(a_kr * a_ru * tau_k) diag(conj(los_ru)) los_kr
with tau_k = K_kr*K_ru / ((K_kr+1)(K_ru+1)).  Per element, the zero-mean
part of G_k has variance a_kr * a_ru * (1 - tau_k).

The serving BS estimates its cascaded and direct channels each slot.
Estimation errors are i.i.d. CN(0, delta1^2) / CN(0, delta2^2) per element
(absolute channel units; `build_statistics` converts normalized inputs).

Two sampling routes exist on purpose:

* `sample_estimated_csi` draws estimates from the Gaussian model the
  phase-shift solver optimizes over: cascaded-estimate entries centered on
  the cascaded LoS with variance sigma_g^2 - delta1^2, direct-estimate
  entries zero-mean with variance sigma_h^2 - delta2^2.
* `sample_physical_channels` draws the Rician/Rayleigh fading physically
  and splits each serving-link channel into estimate + error, with the
  error built from the channel's own scattered part plus fresh Gaussian
  noise so that (a) estimate + error reconstructs the drawn channel
  exactly, (b) the error has per-element variance delta^2, and (c) the
  error is uncorrelated with the estimate, whose per-element variance is
  then sigma^2 - delta^2 as in the Gaussian model.  For the Rayleigh
  direct link the split is exact (independent Gaussian parts); the
  cascaded channel is a product of Gaussians, so the two routes still
  differ in higher moments.  The Monte Carlo evaluator always uses the
  physical route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ScenarioConfig
from .streams import RngLike, crandn, named_children

_UNIT_MODULUS_TOL = 1e-12


def compute_path_loss(distance: float, exponent: float) -> float:
    """Linear large-scale power gain 1 / (1000 * d^exp).

    Equivalently -30 - 10*exp*log10(d) dB of gain.
    """
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    if not exponent > 0:
        raise ValueError(f"path-loss exponent must be positive, got {exponent}")
    return 1.0 / (1000.0 * distance ** exponent)


def rician_combination_factor(k_br: float, k_ru: float) -> float:
    """Fraction of cascaded-channel power carried by the LoS product,
    K_br*K_ru / ((K_br+1)(K_ru+1)).  Infinite factors are the pure-LoS
    limit of the corresponding link."""
    for k in (k_br, k_ru):
        if not k >= 0:
            raise ValueError(f"Rician factors must be >= 0, got {k}")
    return _rician_los_power(k_br) * _rician_los_power(k_ru)


def _rician_los_power(k: float) -> float:
    """K/(K+1), continuous at K = +inf."""
    return 1.0 if math.isinf(k) else k / (k + 1.0)


def rician_weights(k: float) -> tuple[float, float]:
    """Amplitude weights (LoS, NLoS) = (sqrt(K/(K+1)), sqrt(1/(K+1)))."""
    los_power = _rician_los_power(k)
    return math.sqrt(los_power), math.sqrt(1.0 - los_power)


def steering_vector(azimuth: float, elevation: float, grid: tuple[int, int],
                    spacing: float) -> np.ndarray:
    """Planar-wavefront steering vector of an (M, N) rectangular array.

    Element (m, n), zero-based, gets phase
    2*pi*spacing*(m*sin(el)*cos(az) + n*sin(el)*sin(az)); the grid is
    vectorized row-major.  Every entry has unit modulus.
    """
    m_rows, n_cols = grid
    if m_rows < 1 or n_cols < 1:
        raise ValueError(f"grid axes must be >= 1, got {grid}")
    if spacing <= 0:
        raise ValueError(f"element spacing must be positive, got {spacing}")
    m = np.arange(m_rows)[:, None]
    n = np.arange(n_cols)[None, :]
    phase = 2.0 * np.pi * spacing * (
        m * np.sin(elevation) * np.cos(azimuth)
        + n * np.sin(elevation) * np.sin(azimuth)
    )
    return np.exp(1j * phase).reshape(-1)


def los_matrix(rx_angles: tuple[float, float], rx_grid: tuple[int, int],
               tx_angles: tuple[float, float], tx_grid: tuple[int, int],
               spacing: float) -> np.ndarray:
    """Rank-one LoS matrix a_rx(rx_angles) a_tx(tx_angles)^H with
    unit-modulus entries, shape (rx size, tx size)."""
    a_rx = steering_vector(*rx_angles, rx_grid, spacing)
    a_tx = steering_vector(*tx_angles, tx_grid, spacing)
    return np.outer(a_rx, a_tx.conj())


@dataclass(frozen=True)
class ChannelStatistics:
    """Derived large-scale state shared by the solver and the evaluator.

    Index 0 of per-BS arrays is the serving BS.  LoS matrices have
    unit-modulus entries; `cascaded_los[k]` already carries the amplitude
    sqrt(alpha_bs_irs[k] * alpha_irs_user * tau[k]).
    """

    bs_sizes: tuple[int, ...]               # antennas per BS
    irs_size: int                           # reflecting elements
    alpha_direct: np.ndarray                # (n_bs,) BS->user power gains
    alpha_bs_irs: np.ndarray                # (n_bs,) BS->IRS power gains
    alpha_irs_user: float                   # IRS->user power gain
    tau: np.ndarray                         # (n_bs,) cascaded LoS power fractions
    los_bs_irs: tuple[np.ndarray, ...]      # (Mr, Mk) per BS
    los_irs_user: np.ndarray                # (Mr,)
    cascaded_los: tuple[np.ndarray, ...]    # (Mr, Mk) per BS
    sigma_g_sq: np.ndarray                  # (n_bs,) per-element cascaded NLoS variance
    delta1_abs: float                       # cascaded error std, absolute units
    delta2_abs: float                       # direct error std, absolute units
    rician_bs_irs: tuple[float, ...] = ()
    rician_irs_user: float = 0.0

    def __post_init__(self):
        for name in ("alpha_direct", "alpha_bs_irs", "tau", "sigma_g_sq"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for mat in self.los_bs_irs:
            if np.max(np.abs(np.abs(mat) - 1.0)) > _UNIT_MODULUS_TOL:
                raise ValueError("BS->IRS LoS entries must have unit modulus")
        if np.max(np.abs(np.abs(self.los_irs_user) - 1.0)) > _UNIT_MODULUS_TOL:
            raise ValueError("IRS->user LoS entries must have unit modulus")
        if np.any(self.tau < 0) or np.any(self.tau > 1 + 1e-15):
            raise ValueError("tau must lie in [0, 1]")
        if np.any(self.alpha_direct < 0) or np.any(self.alpha_bs_irs < 0):
            raise ValueError("large-scale gains must be non-negative")
        if self.delta1_abs < 0 or self.delta2_abs < 0:
            raise ValueError("error std-devs must be non-negative")

    @property
    def n_bs(self) -> int:
        return len(self.bs_sizes)

    @property
    def sigma_h_sq(self) -> float:
        """Per-element variance of the serving direct channel."""
        return float(self.alpha_direct[0])

    @property
    def estimate_g_var(self) -> float:
        """Per-element variance of the estimated cascaded channel, clamped
        at zero against rounding when delta1 saturates the channel std."""
        return max(float(self.sigma_g_sq[0]) - self.delta1_abs ** 2, 0.0)

    @property
    def estimate_h_var(self) -> float:
        """Per-element variance of the estimated direct channel, clamped at
        zero against rounding when delta2 saturates the channel std."""
        return max(self.sigma_h_sq - self.delta2_abs ** 2, 0.0)


def build_statistics(cfg: ScenarioConfig) -> ChannelStatistics:
    """Derive all large-scale state from a scenario.

    Raises ValueError when the configured error std-devs exceed what the
    channel variances allow (the estimate variance would be negative).
    """
    n = cfg.n_bs
    alpha_direct = np.array([compute_path_loss(cfg.d_bs_user(k), cfg.exp_direct)
                             for k in range(n)])
    alpha_bs_irs = np.array([compute_path_loss(cfg.d_bs_irs(k), cfg.exp_bs_irs)
                             for k in range(n)])
    alpha_irs_user = compute_path_loss(cfg.d_irs_user, cfg.exp_irs_user)
    tau = np.array([rician_combination_factor(cfg.rician_bs_irs[k], cfg.rician_irs_user)
                    for k in range(n)])

    los_irs_user = steering_vector(*cfg.angles_irs_user, cfg.irs_grid, cfg.spacing)
    los_bs_irs = tuple(
        los_matrix(cfg.angles_bs_irs[k], cfg.irs_grid,
                   cfg.angles_bs_irs[k], cfg.bs_grids[k], cfg.spacing)
        for k in range(n)
    )
    cascaded_los = tuple(
        math.sqrt(alpha_bs_irs[k] * alpha_irs_user * tau[k])
        * (los_irs_user.conj()[:, None] * los_bs_irs[k])
        for k in range(n)
    )
    sigma_g_sq = alpha_bs_irs * alpha_irs_user * (1.0 - tau)

    sigma_h_sq = float(alpha_direct[0])
    if cfg.error_units == "normalized":
        delta1_abs = cfg.delta1 * math.sqrt(sigma_g_sq[0])
        delta2_abs = cfg.delta2 * math.sqrt(sigma_h_sq)
    else:
        delta1_abs = cfg.delta1
        delta2_abs = cfg.delta2
    # tiny relative slack so delta == sigma round-trips through the sqrt
    if delta1_abs ** 2 > sigma_g_sq[0] * (1 + 1e-12):
        raise ValueError(
            f"delta1^2 = {delta1_abs**2:.3e} exceeds the cascaded per-element "
            f"variance {sigma_g_sq[0]:.3e}; estimate variance would be negative"
        )
    if delta2_abs ** 2 > sigma_h_sq * (1 + 1e-12):
        raise ValueError(
            f"delta2^2 = {delta2_abs**2:.3e} exceeds the direct per-element "
            f"variance {sigma_h_sq:.3e}; estimate variance would be negative"
        )
    delta1_abs = min(delta1_abs, math.sqrt(sigma_g_sq[0]))
    delta2_abs = min(delta2_abs, math.sqrt(sigma_h_sq))

    return ChannelStatistics(
        bs_sizes=cfg.bs_sizes,
        irs_size=cfg.irs_size,
        alpha_direct=alpha_direct,
        alpha_bs_irs=alpha_bs_irs,
        alpha_irs_user=float(alpha_irs_user),
        tau=tau,
        los_bs_irs=los_bs_irs,
        los_irs_user=los_irs_user,
        cascaded_los=cascaded_los,
        sigma_g_sq=sigma_g_sq,
        delta1_abs=float(delta1_abs),
        delta2_abs=float(delta2_abs),
        rician_bs_irs=cfg.rician_bs_irs,
        rician_irs_user=cfg.rician_irs_user,
    )


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InterferenceRealization:
    """One slot of interferer k's channels towards user 0."""
    g: np.ndarray           # cascaded channel, (Mr, Mk)
    h_direct: np.ndarray    # BS k -> user 0, (Mk,)
    h_own: np.ndarray       # BS k -> its own user, (Mk,); only its direction matters


@dataclass(frozen=True)
class CsiSample:
    """One slot of serving-link CSI as seen by the serving BS.

    When errors are present the true channels are g_hat + g_err and
    h_hat + h_err.  Interference realizations are populated only by the
    physical sampler; the solver never sees them.
    """
    g_hat: np.ndarray                       # estimated cascaded channel, (Mr, M0)
    h_hat: np.ndarray                       # estimated direct channel, (M0,)
    g_err: Optional[np.ndarray] = None      # (Mr, M0)
    h_err: Optional[np.ndarray] = None      # (M0,)
    interference: Optional[tuple[InterferenceRealization, ...]] = None

    @property
    def g_true(self) -> np.ndarray:
        if self.g_err is None:
            raise ValueError("sample carries no error realization")
        return self.g_hat + self.g_err

    @property
    def h_true(self) -> np.ndarray:
        if self.h_err is None:
            raise ValueError("sample carries no error realization")
        return self.h_hat + self.h_err


@dataclass(frozen=True)
class PhysicalBatch:
    """Vectorized physical-channel draws; leading axis is the sample index."""
    g_true: np.ndarray                      # (n, Mr, M0)
    h_true: np.ndarray                      # (n, M0)
    g_err: np.ndarray                       # (n, Mr, M0)
    h_err: np.ndarray                       # (n, M0)
    interference: Optional[tuple] = None    # per interferer: (g, h_direct, h_own)

    @property
    def g_hat(self) -> np.ndarray:
        return self.g_true - self.g_err

    @property
    def h_hat(self) -> np.ndarray:
        return self.h_true - self.h_err

    def __len__(self) -> int:
        return self.h_true.shape[0]


class EstimatedCsiSampler:
    """Gaussian-model CSI sampler used by the phase-shift solver.

    Holds one named child stream per drawn quantity so that repeated
    `draw` calls continue the streams deterministically.
    """

    _NAMES = ("est/g", "est/h", "err/g", "err/h")

    def __init__(self, stats: ChannelStatistics, rng: RngLike):
        if (stats.delta1_abs ** 2 > stats.sigma_g_sq[0] * (1 + 1e-9)
                or stats.delta2_abs ** 2 > stats.sigma_h_sq * (1 + 1e-9)):
            raise ValueError("error variances exceed channel variances")
        self._stats = stats
        self._streams = named_children(rng, self._NAMES)

    def draw(self, n: int, with_errors: bool = False) -> tuple:
        s = self._stats
        mr, m0 = s.irs_size, s.bs_sizes[0]
        g_hat = s.cascaded_los[0][None, :, :] + crandn(
            self._streams["est/g"], (n, mr, m0), s.estimate_g_var)
        h_hat = crandn(self._streams["est/h"], (n, m0), s.estimate_h_var)
        if not with_errors:
            return g_hat, h_hat
        g_err = crandn(self._streams["err/g"], (n, mr, m0), s.delta1_abs ** 2)
        h_err = crandn(self._streams["err/h"], (n, m0), s.delta2_abs ** 2)
        return g_hat, h_hat, g_err, h_err


class PhysicalChannelSampler:
    """Physical Rician/Rayleigh sampler used by the Monte Carlo evaluator.

    Each drawn quantity has its own named stream, so draws of one quantity
    are unaffected by shape changes in another (common-random-number
    pairing across sweeps) and by whether interference is requested.
    """

    def __init__(self, stats: ChannelStatistics, rng: RngLike,
                 include_interference: bool = False):
        self._stats = stats
        self._include_interference = include_interference
        names = ["irs-user", "bs-irs/0", "direct/0", "err/g", "err/h"]
        if include_interference:
            for k in range(1, stats.n_bs):
                names += [f"bs-irs/{k}", f"direct/{k}", f"own/{k}"]
        self._streams = named_children(rng, names)

    def _bs_irs_channel(self, k: int, n: int) -> np.ndarray:
        """H_kr = sqrt(a_kr) * (w_los * los + w_nlos * CN(0,1)), (n, Mr, Mk)."""
        s = self._stats
        w_los, w_nlos = rician_weights(s.rician_bs_irs[k])
        shape = (n, s.irs_size, s.bs_sizes[k])
        scatter = crandn(self._streams[f"bs-irs/{k}"], shape, 1.0)
        return math.sqrt(s.alpha_bs_irs[k]) * (w_los * s.los_bs_irs[k][None] + w_nlos * scatter)

    @staticmethod
    def _split_error(centered: np.ndarray, sigma_sq: float, delta_sq: float,
                     stream: np.random.Generator) -> np.ndarray:
        """Error with per-element variance delta_sq, uncorrelated with
        (channel - error): a (delta^2/sigma^2) share of the channel's own
        zero-mean part plus independent CN(0, delta^2 (1 - delta^2/sigma^2))
        noise.  The resulting estimate has variance sigma^2 - delta^2 and,
        for Gaussian channels, is exactly independent of the error."""
        share = 0.0 if sigma_sq == 0.0 else delta_sq / sigma_sq
        noise = crandn(stream, centered.shape, delta_sq * max(1.0 - share, 0.0))
        return share * centered + noise

    def draw(self, n: int) -> PhysicalBatch:
        s = self._stats
        mr, m0 = s.irs_size, s.bs_sizes[0]

        w_los, w_nlos = rician_weights(s.rician_irs_user)
        h_ru = math.sqrt(s.alpha_irs_user) * (
            w_los * s.los_irs_user[None, :]
            + w_nlos * crandn(self._streams["irs-user"], (n, mr), 1.0)
        )  # (n, Mr); shared by every cascaded link of the slot

        h_bs_irs0 = self._bs_irs_channel(0, n)
        g_true = h_ru.conj()[:, :, None] * h_bs_irs0          # diag(h_ru^H) H_0r
        h_true = crandn(self._streams["direct/0"], (n, m0), s.alpha_direct[0])
        g_err = self._split_error(g_true - s.cascaded_los[0][None],
                                  float(s.sigma_g_sq[0]), s.delta1_abs ** 2,
                                  self._streams["err/g"])
        h_err = self._split_error(h_true, s.sigma_h_sq, s.delta2_abs ** 2,
                                  self._streams["err/h"])

        interference = None
        if self._include_interference:
            per_k = []
            for k in range(1, s.n_bs):
                h_bs_irs = self._bs_irs_channel(k, n)
                g_k = h_ru.conj()[:, :, None] * h_bs_irs
                h_k = crandn(self._streams[f"direct/{k}"], (n, s.bs_sizes[k]),
                             s.alpha_direct[k])
                # own-user link enters only through its direction (MRT), so a
                # unit per-element variance stands in for its large-scale gain
                h_own = crandn(self._streams[f"own/{k}"], (n, s.bs_sizes[k]), 1.0)
                per_k.append((g_k, h_k, h_own))
            interference = tuple(per_k)

        return PhysicalBatch(g_true=g_true, h_true=h_true, g_err=g_err, h_err=h_err,
                             interference=interference)


def sample_estimated_csi(stats: ChannelStatistics, cfg: ScenarioConfig, rng: RngLike,
                         with_errors: bool = False) -> CsiSample:
    """One Gaussian-model CSI draw; optionally with an error realization."""
    sampler = EstimatedCsiSampler(stats, rng)
    if with_errors:
        g_hat, h_hat, g_err, h_err = sampler.draw(1, with_errors=True)
        return CsiSample(g_hat=g_hat[0], h_hat=h_hat[0], g_err=g_err[0], h_err=h_err[0])
    g_hat, h_hat = sampler.draw(1)
    return CsiSample(g_hat=g_hat[0], h_hat=h_hat[0])


def sample_physical_channels(stats: ChannelStatistics, cfg: ScenarioConfig,
                             rng: RngLike) -> CsiSample:
    """One physical draw with error split and interference realizations."""
    batch = PhysicalChannelSampler(stats, rng, include_interference=True).draw(1)
    interference = tuple(
        InterferenceRealization(g=g[0], h_direct=h[0], h_own=own[0])
        for g, h, own in (batch.interference or ())
    )
    return CsiSample(
        g_hat=batch.g_hat[0], h_hat=batch.h_hat[0],
        g_err=batch.g_err[0], h_err=batch.h_err[0],
        interference=interference,
    )
