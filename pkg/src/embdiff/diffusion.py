"""Forward sampling, the closed-form posterior, and the training losses.

All operations are pure functions of ndarrays. Sequences are (n, d) arrays
of latent vectors; losses reduce by means over positions and dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable, round_logits
from .errors import ShapeError
from .schedules import NoiseSchedule, step_alpha


def forward_sample(z0: np.ndarray, t: int, s: NoiseSchedule, noise: np.ndarray) -> np.ndarray:
    """Draw z_t = sqrt(alpha_bar_t) z_0 + sqrt(beta_bar_t) eps.

    Rescaled schedules contribute their amplified beta_bar automatically.
    """
    if not 0 <= t <= s.T:
        raise ShapeError(f"timestep {t} out of range [0, {s.T}]")
    z0 = np.asarray(z0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != z0.shape:
        raise ShapeError(f"noise shape {noise.shape} != data shape {z0.shape}")
    return np.sqrt(s.alpha_bar[t]) * z0 + np.sqrt(s.beta_bar[t]) * noise


@dataclass(frozen=True)
class PosteriorCoefficients:
    """Coefficients of q(z_prev | z_t, z_0) = N(xi z_0 + lam z_t, beta_tilde I)."""

    xi: float
    lam: float
    beta_tilde: float


def posterior_coefficients(s: NoiseSchedule, t: int, t_prev: int | None = None) -> PosteriorCoefficients:
    """Closed-form posterior coefficients between two trajectory steps.

    With t_prev = t - 1 (the default) and an unrescaled schedule this is
    exactly

        xi   = sqrt(alpha_bar_{t-1}) beta_t / (1 - alpha_bar_t)
        lam  = sqrt(alpha_t) (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
        beta_tilde = beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)

    with alpha_t = alpha_bar_t / alpha_bar_{t-1} and beta_t = 1 - alpha_t.
    The implementation uses the schedule's stored beta_bar wherever
    1 - alpha_bar appears, which coincides on unrescaled and
    variance-preserving schedules and generalizes consistently when a
    plain-rescaled schedule is sampled with its amplified noise.
    At t = 1, (xi, lam) = (1, 0) exactly.
    """
    if t_prev is None:
        t_prev = t - 1
    if not 0 <= t_prev < t <= s.T:
        raise ShapeError(f"invalid step pair ({t_prev}, {t}) for T={s.T}")
    ab_t = float(s.alpha_bar[t])
    ab_p = float(s.alpha_bar[t_prev])
    bb_t = float(s.beta_bar[t])
    bb_p = float(s.beta_bar[t_prev])
    alpha = step_alpha(s, t, t_prev)
    beta_eff = bb_t - alpha * bb_p  # equals beta_t = 1 - alpha when beta_bar = 1 - alpha_bar
    xi = np.sqrt(ab_p) * beta_eff / bb_t
    lam = np.sqrt(alpha) * bb_p / bb_t
    beta_tilde = max(beta_eff * bb_p / bb_t, 0.0)
    return PosteriorCoefficients(xi=float(xi), lam=float(lam), beta_tilde=float(beta_tilde))


def posterior_sample(
    z_t: np.ndarray,
    z0_hat: np.ndarray,
    t: int,
    s: NoiseSchedule,
    noise: np.ndarray,
    t_prev: int | None = None,
) -> np.ndarray:
    """One reverse step: xi z0_hat + lam z_t + sqrt(beta_tilde) eps."""
    z_t = np.asarray(z_t, dtype=np.float64)
    z0_hat = np.asarray(z0_hat, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if z0_hat.shape != z_t.shape or noise.shape != z_t.shape:
        raise ShapeError("z_t, z0_hat, and noise must share one shape")
    c = posterior_coefficients(s, t, t_prev)
    return c.xi * z0_hat + c.lam * z_t + np.sqrt(c.beta_tilde) * noise


def loss_vlb(z0_hat: np.ndarray, z0: np.ndarray) -> float:
    """Mean squared error between the prediction and the clean latents."""
    z0_hat = np.asarray(z0_hat, dtype=np.float64)
    z0 = np.asarray(z0, dtype=np.float64)
    if z0_hat.shape != z0.shape:
        raise ShapeError(f"shape mismatch {z0_hat.shape} != {z0.shape}")
    diff = z0_hat - z0
    return float((diff * diff).mean())


def _nll_rows(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row negative log softmax at the target indices."""
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return lse - logits[np.arange(len(y)), y]


def loss_anchor(z0_hat: np.ndarray, y: np.ndarray, table: EmbeddingTable) -> float:
    """Rounding NLL of the true tokens under the model's z_0 prediction.

    Mean over positions of -log softmax(z0_hat[i] . e)[y_i]. In training,
    gradients flow into both the prediction and the embedding table.
    """
    y = np.asarray(y)
    z0_hat = np.asarray(z0_hat, dtype=np.float64)
    if z0_hat.ndim != 2 or len(y) != z0_hat.shape[0]:
        raise ShapeError("z0_hat must be (n, d) with one token per row")
    if y.size and (y.min() < 0 or y.max() >= table.V):
        raise ShapeError("token index out of range")
    logits = round_logits(z0_hat, table)
    return float(_nll_rows(logits, y).mean())


def loss_round(y: np.ndarray, table: EmbeddingTable, beta_0: float = 0.0, noise: np.ndarray | None = None) -> float:
    """Rounding NLL of the tokens under their own (optionally jittered) embeddings.

    The input is z_0 = e(y) + sqrt(beta_0) eps; with the default beta_0 = 0
    the embeddings are classified clean, which is what makes this a weak
    regularizer compared to the anchor loss.
    """
    y = np.asarray(y)
    z0 = table.lookup(y)
    if beta_0 > 0:
        if noise is None:
            raise ShapeError("beta_0 > 0 requires a noise array")
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != z0.shape:
            raise ShapeError(f"noise shape {noise.shape} != {z0.shape}")
        z0 = z0 + np.sqrt(beta_0) * noise
    return loss_anchor(z0, y, table)


def length_nll(length_logits: np.ndarray, n_true: int) -> float:
    """Negative log-likelihood of the true length under logits over [1, n_max]."""
    length_logits = np.asarray(length_logits, dtype=np.float64)
    n_max = length_logits.shape[-1]
    if not 1 <= n_true <= n_max:
        raise ShapeError(f"length {n_true} outside [1, {n_max}]")
    return float(_nll_rows(length_logits[None, :], np.array([n_true - 1]))[0])


def loss_total(
    z0_hat: np.ndarray,
    z0: np.ndarray,
    y: np.ndarray,
    length_logits: np.ndarray,
    n_true: int,
    table: EmbeddingTable,
    lambda_len: float = 0.1,
) -> float:
    """Combined objective: loss_vlb + loss_anchor + lambda_len * length NLL."""
    total = loss_vlb(z0_hat, z0) + loss_anchor(z0_hat, y, table)
    if lambda_len != 0.0:
        total += lambda_len * length_nll(length_logits, n_true)
    return total
