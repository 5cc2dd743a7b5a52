"""Noise schedules: construction, rescaling, and timestep subsampling.

A schedule stores the per-timestep series (alpha_bar_t, beta_bar_t) of the
forward corruption q(z_t | z_0) = N(sqrt(alpha_bar_t) z_0, beta_bar_t I),
indexed t = 0..T with the clean-data convention (alpha_bar_0, beta_bar_0)
= (1, 0). Rescaling multiplies beta_bar by F^2, either as-is or renormalized
to the variance-preserving form.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError

KINDS = ("linear", "cosine", "sqrt")

# Numerical guards: alpha_bar is kept inside [ALPHA_BAR_MIN, 1] and the
# derived per-step beta_t = 1 - alpha_bar_t/alpha_bar_{t-1} below BETA_MAX,
# so posterior coefficients never divide by ~0 at t = T.
ALPHA_BAR_MIN = 1e-5
BETA_MAX = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable (alpha_bar, beta_bar) series with rescaling state."""

    kind: str
    T: int
    alpha_bar: np.ndarray  # shape (T+1,), values in (0, 1], non-increasing
    beta_bar: np.ndarray   # shape (T+1,), non-negative
    rescale_factor: float = 1.0
    variance_preserving: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise ConfigurationError(f"T must be >= 1, got {self.T}")
        if self.alpha_bar.shape != (self.T + 1,) or self.beta_bar.shape != (self.T + 1,):
            raise ShapeError("alpha_bar/beta_bar must have length T+1")
        if not (np.all(self.alpha_bar > 0) and np.all(self.alpha_bar <= 1)):
            raise ConfigurationError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(self.alpha_bar) > 0):
            raise ConfigurationError("alpha_bar must be non-increasing")
        if np.any(self.beta_bar < 0):
            raise ConfigurationError("beta_bar values must be non-negative")
        self.alpha_bar.flags.writeable = False
        self.beta_bar.flags.writeable = False

    @property
    def rescaled(self) -> bool:
        return self.rescale_factor != 1.0 or self.variance_preserving

    def descriptor(self) -> dict:
        """JSON-friendly identity of this schedule."""
        return {
            "kind": self.kind,
            "T": self.T,
            "rescale_factor": self.rescale_factor,
            "variance_preserving": self.variance_preserving,
        }


def _alpha_bar_series(kind: str, T: int) -> np.ndarray:
    t = np.arange(1, T + 1, dtype=np.float64)
    if kind == "linear":
        # Per-step betas linearly spaced over the canonical [1e-4, 0.02]
        # range defined at 1000 steps; the range scales with 1000/T so the
        # cumulative noise at a given t/T is independent of T.
        scale = 1000.0 / T
        betas = np.linspace(scale * 1e-4, scale * 0.02, T)
        series = np.cumprod(1.0 - betas)
    elif kind == "cosine":
        s = 0.008
        f = np.cos((t / T + s) / (1 + s) * math.pi / 2) ** 2
        f0 = math.cos(s / (1 + s) * math.pi / 2) ** 2
        series = f / f0
    elif kind == "sqrt":
        s = 1e-4
        series = 1.0 - np.sqrt(t / T + s)
    else:
        raise ConfigurationError(f"unknown schedule kind: {kind!r} (expected one of {KINDS})")
    return series


def build_schedule(kind: str, T: int) -> NoiseSchedule:
    """Construct an unrescaled schedule of the given kind.

    alpha_bar[0] = 1 and beta_bar[0] = 0 by the clean-data convention;
    alpha_bar[t] follows the kind's formula for t >= 1, clipped to
    [ALPHA_BAR_MIN, 1]; beta_bar = 1 - alpha_bar.
    """
    if T < 1:
        raise ConfigurationError(f"T must be >= 1, got {T}")
    series = np.clip(_alpha_bar_series(kind, T), ALPHA_BAR_MIN, 1.0)
    alpha_bar = np.concatenate(([1.0], series))
    # Enforce monotonicity in case of pathological clipping.
    alpha_bar = np.minimum.accumulate(alpha_bar)
    beta_bar = 1.0 - alpha_bar
    return NoiseSchedule(kind=kind, T=T, alpha_bar=alpha_bar, beta_bar=beta_bar)


def rescale(s: NoiseSchedule, factor: float, variance_preserving: bool = False) -> NoiseSchedule:
    """Amplify the schedule's noise by a factor F >= 1.

    Plain rescaling keeps alpha_bar and multiplies beta_bar by F^2, so the
    forward sample becomes sqrt(alpha_bar) z_0 + F sqrt(beta_bar) eps. The
    variance-preserving variant renormalizes both series by
    (alpha_bar + F^2 beta_bar), restoring alpha_bar' + beta_bar' = 1 while
    dividing the signal-to-noise ratio by exactly F^2.
    """
    if factor < 1.0:
        raise ConfigurationError(f"rescaling factor must be >= 1, got {factor}")
    if s.rescaled:
        raise ConfigurationError("schedule is already rescaled")
    if factor == 1.0:
        return s
    f2 = factor * factor
    if variance_preserving:
        denom = s.alpha_bar + f2 * s.beta_bar
        alpha_bar = s.alpha_bar / denom
        beta_bar = 1.0 - alpha_bar
    else:
        alpha_bar = s.alpha_bar.copy()
        beta_bar = f2 * s.beta_bar
    return NoiseSchedule(
        kind=s.kind,
        T=s.T,
        alpha_bar=alpha_bar,
        beta_bar=beta_bar,
        rescale_factor=factor,
        variance_preserving=variance_preserving,
    )


def snr(s: NoiseSchedule, t: int) -> float:
    """Signal-to-noise ratio alpha_bar_t / beta_bar_t at timestep t in [1, T]."""
    if not 1 <= t <= s.T:
        raise ShapeError(f"timestep {t} out of range [1, {s.T}]")
    return float(s.alpha_bar[t] / s.beta_bar[t])


def step_alpha(s: NoiseSchedule, t: int, t_prev: int | None = None) -> float:
    """Per-step signal ratio alpha = alpha_bar_t / alpha_bar_{t_prev}.

    The derived per-step beta = 1 - alpha is capped at BETA_MAX. t_prev
    defaults to t - 1; subsampled trajectories pass the previous kept step.
    """
    if t_prev is None:
        t_prev = t - 1
    if not 0 <= t_prev < t <= s.T:
        raise ShapeError(f"invalid step pair ({t_prev}, {t}) for T={s.T}")
    return max(float(s.alpha_bar[t] / s.alpha_bar[t_prev]), 1.0 - BETA_MAX)


def subsample_trajectory(T: int, K: int) -> list[int]:
    """Pick K evenly spaced timesteps tau_1 < ... < tau_K = T.

    Uses tau_i = round(i*T/K); K = T returns the full trajectory 1..T.
    """
    if not 1 <= K <= T:
        raise ConfigurationError(f"K must satisfy 1 <= K <= T, got K={K}, T={T}")
    return [round(i * T / K) for i in range(1, K + 1)]


def dgs_grid(T: int, grid_size: int) -> list[int]:
    """Midpoint quadrature grid for the timestep-averaged degeneration score.

    Cell midpoints (i + 1/2) * T / grid_size rounded to integer timesteps,
    clipped to [1, T] and deduplicated (relevant only when T < grid_size).
    """
    if grid_size < 2:
        raise ConfigurationError(f"grid_size must be >= 2, got {grid_size}")
    ts = [min(max(round((i + 0.5) * T / grid_size), 1), T) for i in range(grid_size)]
    return sorted(set(ts))
