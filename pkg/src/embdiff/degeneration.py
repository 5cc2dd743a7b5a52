"""Degenerated-model classification and the degeneration score (DGS).

The degenerated model classifies each noised embedding back to a vocabulary
entry position-wise, ignoring all context. Its Monte-Carlo classification
accuracy, averaged over an even timestep grid, is the degeneration score of
a schedule: high DGS means the denoising task is too easy and a trained
model can collapse into the context-free classifier. The rescaling-factor
search raises the schedule's noise until the DGS falls below a threshold.

All Monte-Carlo draws come from counter-based streams keyed by
(seed, t, draw), so estimates are bit-reproducible and independent of
worker count, and the same noise is shared across candidate factors during
the search (common random numbers).
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .embeddings import EmbeddingTable, classification_loss
from .errors import ConfigurationError
from .schedules import NoiseSchedule, dgs_grid, rescale

CLASSIFIERS = ("nearest_neighbor", "full_loss")

# Default Monte-Carlo budget: draws per (row, t) and the row-subsample cap
# applied when V exceeds it. 20 grid points x 2000 rows x 4 draws puts the
# standard error of a DGS estimate below 1e-3.
DEFAULT_SAMPLES = 4
DEFAULT_ROWS = 2000
DEFAULT_GRID = 20

# Leaner budget used inside the factor search, where the tolerance on F is
# two orders of magnitude looser than on DGS itself.
SEARCH_SAMPLES = 2
SEARCH_ROWS = 1000


@dataclass(frozen=True)
class DgsReport:
    """Per-timestep degeneration accuracies for one schedule configuration."""

    schedule: dict
    timesteps: list[int]
    dgs_t: np.ndarray
    dgs: float
    mc_samples: int
    source_embeddings: dict
    classifier: str


def _scores(z: np.ndarray, vectors32: np.ndarray, norms32: np.ndarray, classifier: str) -> np.ndarray:
    """Classification scores (higher = better) for a batch of latents."""
    dots = z @ vectors32.T
    if classifier == "nearest_neighbor":
        return 2.0 * dots - norms32[None, :]
    if classifier == "full_loss":
        # argmin of mean-square distance + rounding NLL; the log-sum-exp
        # term is constant across candidates and drops out.
        d = vectors32.shape[1]
        return dots * (1.0 + 2.0 / d) - norms32[None, :] / d
    raise ConfigurationError(f"unknown classifier {classifier!r} (expected one of {CLASSIFIERS})")


def degenerated_model(z_t: np.ndarray, table: EmbeddingTable, classifier: str = "full_loss") -> np.ndarray:
    """Position-wise context-free classification of an (n, d) latent batch.

    Returns the token index sequence minimizing classification_loss
    (full_loss) or the mean-square distance (nearest_neighbor) per position;
    positions never interact. Ties break toward the lowest index.
    """
    z_t = np.atleast_2d(np.asarray(z_t, dtype=np.float64))
    vectors = table.vectors
    norms = (vectors * vectors).sum(axis=1)
    scores = _scores(z_t, vectors, norms, classifier)
    return np.argmax(scores, axis=1)


def _accuracy_at(
    t: int,
    alpha_bar_t: float,
    beta_bar_t: float,
    vectors32: np.ndarray,
    norms32: np.ndarray,
    row_idx: np.ndarray,
    N: int,
    seed: int,
    classifier: str,
) -> float:
    a = math.sqrt(alpha_bar_t)
    b = math.sqrt(beta_bar_t)
    base = vectors32[row_idx]
    correct = 0
    for draw in range(N):
        eps = rng.stream(rng.DGS_NOISE, seed, t, draw).standard_normal(base.shape, dtype=np.float32)
        z = a * base + b * eps
        pred = np.argmax(_scores(z, vectors32, norms32, classifier), axis=1)
        correct += int((pred == row_idx).sum())
    return correct / (N * len(row_idx))


def _mc_arrays(table: EmbeddingTable, seed: int, row_subsample: int):
    vectors32 = table.vectors.astype(np.float32)
    norms32 = (vectors32.astype(np.float64) ** 2).sum(axis=1).astype(np.float32)
    if row_subsample and table.V > row_subsample:
        row_idx = rng.stream(rng.DGS_ROWS, seed).choice(table.V, size=row_subsample, replace=False)
        row_idx.sort()
    else:
        row_idx = np.arange(table.V)
    return vectors32, norms32, row_idx


def dgs_at(
    s: NoiseSchedule,
    t: int,
    table: EmbeddingTable,
    N: int = DEFAULT_SAMPLES,
    seed: int = 0,
    classifier: str = "nearest_neighbor",
    row_subsample: int = DEFAULT_ROWS,
) -> float:
    """Monte-Carlo accuracy of the degenerated model at one timestep.

    Samples z_t = sqrt(alpha_bar_t) e_i + sqrt(beta_bar_t) eps for each
    (possibly subsampled) vocabulary row and N draws; the nearest-neighbor
    search always runs against the full table.
    """
    if N < 1:
        raise ConfigurationError(f"N must be >= 1, got {N}")
    vectors32, norms32, row_idx = _mc_arrays(table, seed, row_subsample)
    return _accuracy_at(
        t, float(s.alpha_bar[t]), float(s.beta_bar[t]), vectors32, norms32, row_idx, N, seed, classifier
    )


_WORKER_ARRAYS = None


def _init_worker(vectors32, norms32, row_idx):
    global _WORKER_ARRAYS
    _WORKER_ARRAYS = (vectors32, norms32, row_idx)


def _worker_accuracy(task):
    t, alpha_bar_t, beta_bar_t, N, seed, classifier = task
    vectors32, norms32, row_idx = _WORKER_ARRAYS
    return _accuracy_at(t, alpha_bar_t, beta_bar_t, vectors32, norms32, row_idx, N, seed, classifier)


def compute_dgs(
    s: NoiseSchedule,
    table: EmbeddingTable,
    grid_size: int = DEFAULT_GRID,
    N: int = DEFAULT_SAMPLES,
    seed: int = 0,
    classifier: str = "nearest_neighbor",
    row_subsample: int = DEFAULT_ROWS,
    workers: int = 1,
) -> DgsReport:
    """Average dgs_at over an even midpoint timestep grid.

    Results are identical for any worker count: each grid point draws from
    its own (seed, t, draw)-keyed stream.
    """
    ts = dgs_grid(s.T, grid_size)
    vectors32, norms32, row_idx = _mc_arrays(table, seed, row_subsample)
    if workers > 1:
        tasks = [(t, float(s.alpha_bar[t]), float(s.beta_bar[t]), N, seed, classifier) for t in ts]
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(vectors32, norms32, row_idx)
        ) as pool:
            accs = list(pool.map(_worker_accuracy, tasks))
    else:
        accs = [
            _accuracy_at(t, float(s.alpha_bar[t]), float(s.beta_bar[t]), vectors32, norms32, row_idx, N, seed, classifier)
            for t in ts
        ]
    dgs_t = np.array(accs)
    return DgsReport(
        schedule=s.descriptor(),
        timesteps=ts,
        dgs_t=dgs_t,
        dgs=float(dgs_t.mean()),
        mc_samples=N,
        source_embeddings={"V": table.V, "d": table.d, "sigma_e": table.sigma_e, "seed": table.seed},
        classifier=classifier,
    )


def _dgs_exceeds(
    s: NoiseSchedule,
    table_arrays,
    grid_size: int,
    N: int,
    seed: int,
    classifier: str,
    threshold: float,
) -> tuple[bool, float, int]:
    """Decide DGS > threshold, aborting as soon as the partial sum proves it.

    Accuracies are accumulated in ascending t (descending accuracy); once
    the running sum alone exceeds threshold * |grid| the remaining
    non-negative terms cannot change the decision. Returns (exceeds,
    dgs_or_lower_bound, points_evaluated).
    """
    vectors32, norms32, row_idx = table_arrays
    ts = dgs_grid(s.T, grid_size)
    budget = threshold * len(ts)
    total = 0.0
    for k, t in enumerate(ts):
        total += _accuracy_at(
            t, float(s.alpha_bar[t]), float(s.beta_bar[t]), vectors32, norms32, row_idx, N, seed, classifier
        )
        if total > budget:
            return True, total / len(ts), k + 1
    return False, total / len(ts), len(ts)


def search_factor(
    s: NoiseSchedule,
    dgs_max: float,
    delta_f: float = 0.5,
    variance_preserving: bool = False,
    table: EmbeddingTable | None = None,
    grid_size: int = DEFAULT_GRID,
    N: int = SEARCH_SAMPLES,
    seed: int = 0,
    classifier: str = "nearest_neighbor",
    row_subsample: int = SEARCH_ROWS,
    f_cap: float = 100.0,
) -> tuple[float, list[tuple[float, float, bool]]]:
    """Smallest F in {1, 1+dF, 1+2dF, ...} with DGS(rescaled schedule) <= dgs_max.

    Brute-force ascending scan. Returns (F, trail) where trail records one
    (F, dgs_estimate, complete) triple per candidate; rejected candidates
    may carry a partial lower-bound estimate (complete=False) because the
    scan aborts a candidate as soon as its grid sum provably exceeds the
    threshold.
    """
    if not 0.0 < dgs_max < 1.0:
        raise ConfigurationError(f"dgs_max must lie in (0, 1), got {dgs_max}")
    if delta_f <= 0:
        raise ConfigurationError(f"delta_f must be positive, got {delta_f}")
    if s.rescaled:
        raise ConfigurationError("search requires an unrescaled schedule")
    if table is None:
        raise ConfigurationError("an embedding table is required")
    arrays = _mc_arrays(table, seed, row_subsample)
    trail: list[tuple[float, float, bool]] = []
    step = 0
    while True:
        factor = 1.0 + step * delta_f
        if factor > f_cap:
            raise ConfigurationError(
                f"rescaling-factor search exceeded cap {f_cap} without reaching DGS <= {dgs_max}"
            )
        candidate = rescale(s, factor, variance_preserving)
        exceeds, estimate, points = _dgs_exceeds(candidate, arrays, grid_size, N, seed, classifier, dgs_max)
        trail.append((factor, estimate, points == len(dgs_grid(s.T, grid_size))))
        if not exceeds:
            return factor, trail
        step += 1


def deg_model_loss(
    beta_bar: float,
    d: int,
    V: int = 10000,
    sigma_e: float = 1.0,
    table_seed: int = 0,
    N: int = 2,
    seed: int = 0,
    rows: int = 1000,
    table: EmbeddingTable | None = None,
) -> tuple[float, float]:
    """Monte-Carlo loss limits of the degenerated model at one noise level.

    Samples z_t = sqrt(max(1 - beta_bar, 0)) z_0 + sqrt(beta_bar) eps over
    vocabulary rows and returns

    * correct_loss: mean classification_loss of the degenerated model's own
      prediction against the true embedding, L(e_pred, z_0) - the quantity
      that collapses to 0 wherever the classifier stays accurate;
    * wrong_loss: mean mean-square distance (1/d)||z_t - e_j||^2 to a random
      wrong row, which converges to 2 sigma_e^2 as beta_bar -> 0.
    """
    if beta_bar < 0:
        raise ConfigurationError(f"beta_bar must be >= 0, got {beta_bar}")
    if table is None:
        from .embeddings import init_gaussian

        table = init_gaussian(V, d, sigma_e, table_seed)
    vectors = table.vectors
    norms64 = (vectors * vectors).sum(axis=1)
    a = math.sqrt(max(1.0 - beta_bar, 0.0))
    b = math.sqrt(beta_bar)
    gen_rows = rng.stream(rng.LEMMA, seed)
    row_idx = gen_rows.choice(table.V, size=min(rows, table.V), replace=False)
    base = vectors[row_idx]
    correct_total = 0.0
    wrong_total = 0.0
    count = 0
    for draw in range(N):
        gen = rng.stream(rng.LEMMA, seed, draw)
        eps = gen.standard_normal(base.shape)
        z = a * base + b * eps
        # Degenerated prediction by the full Definition-1 loss.
        scores = z @ vectors.T
        scores *= 1.0 + 2.0 / table.d
        scores -= norms64[None, :] / table.d
        pred = np.argmax(scores, axis=1)
        pred_vecs = vectors[pred]
        # classification_loss(pred_vec, true row) for every sample, batched.
        diff = pred_vecs - base
        msd = (diff * diff).mean(axis=1)
        logits = pred_vecs @ vectors.T
        m = logits.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
        nll = lse - logits[np.arange(len(row_idx)), row_idx]
        correct_total += float((msd + nll).sum())
        # Mean-square distance to a uniformly random wrong row.
        wrong = (row_idx + 1 + gen.integers(0, table.V - 1, size=len(row_idx))) % table.V
        wdiff = z - vectors[wrong]
        wrong_total += float((wdiff * wdiff).mean(axis=1).sum())
        count += len(row_idx)
    return correct_total / count, wrong_total / count


def classifier_agreement(
    s: NoiseSchedule,
    table: EmbeddingTable,
    grid_size: int = DEFAULT_GRID,
    N: int = 1,
    seed: int = 0,
    row_subsample: int = SEARCH_ROWS,
) -> float:
    """Fraction of decisions where nearest_neighbor and full_loss agree."""
    vectors32, norms32, row_idx = _mc_arrays(table, seed, row_subsample)
    agree = 0
    total = 0
    for t in dgs_grid(s.T, grid_size):
        a = math.sqrt(float(s.alpha_bar[t]))
        b = math.sqrt(float(s.beta_bar[t]))
        for draw in range(N):
            eps = rng.stream(rng.DGS_NOISE, seed, t, draw).standard_normal((len(row_idx), table.d), dtype=np.float32)
            z = a * vectors32[row_idx] + b * eps
            p_nn = np.argmax(_scores(z, vectors32, norms32, "nearest_neighbor"), axis=1)
            p_fl = np.argmax(_scores(z, vectors32, norms32, "full_loss"), axis=1)
            agree += int((p_nn == p_fl).sum())
            total += len(row_idx)
    return agree / total
