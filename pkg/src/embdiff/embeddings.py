"""Token embedding table with the tied rounding head.

The table holds one d-dimensional vector per vocabulary entry. The rounding
head maps a continuous vector back to a token distribution via a softmax
over raw dot-product logits; distances use the mean-square convention
(divided by d) so loss scales stay dimension-independent while logits keep
their raw d-proportional magnitude.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ConfigurationError, ShapeError


@dataclass
class EmbeddingTable:
    """V x d embedding matrix plus its initialization scale."""

    vectors: np.ndarray  # shape (V, d), float64
    sigma_e: float
    seed: int | None = None  # initialization seed, if Gaussian-initialized

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ShapeError("embedding matrix must be 2-dimensional")
        if self.V < 2 or self.d < 1:
            raise ConfigurationError(f"need V >= 2 and d >= 1, got V={self.V}, d={self.d}")
        if not np.all(np.isfinite(self.vectors)):
            raise ConfigurationError("embedding matrix contains non-finite entries")

    @property
    def V(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def lookup(self, tokens: np.ndarray) -> np.ndarray:
        """Row lookup: returns vectors[tokens], shape tokens.shape + (d,)."""
        tokens = np.asarray(tokens)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.V):
            raise ShapeError("token index out of range")
        return self.vectors[tokens]


def init_gaussian(V: int, d: int, sigma_e: float, seed: int) -> EmbeddingTable:
    """i.i.d. N(0, sigma_e^2) table, deterministic for a fixed seed."""
    if V < 2 or d < 1:
        raise ConfigurationError(f"need V >= 2 and d >= 1, got V={V}, d={d}")
    if sigma_e <= 0:
        raise ConfigurationError(f"sigma_e must be positive, got {sigma_e}")
    vectors = rng.stream(rng.EMBEDDINGS, seed).standard_normal((V, d)) * sigma_e
    return EmbeddingTable(vectors=vectors, sigma_e=sigma_e, seed=seed)


def round_logits(z: np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Raw dot-product logits z . e_i over the vocabulary.

    Accepts a single d-vector or an (..., d) stack; the rounding
    distribution p(y | z) is the softmax of the returned logits.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != table.d:
        raise ShapeError(f"expected last dimension {table.d}, got {z.shape[-1]}")
    return z @ table.vectors.T


def nearest_neighbor(z: np.ndarray, table: EmbeddingTable) -> int:
    """Index of the row minimizing the mean-square distance to z.

    Ties break toward the lowest index.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (table.d,):
        raise ShapeError(f"expected a vector of dimension {table.d}")
    diff = table.vectors - z
    return int(np.argmin((diff * diff).mean(axis=1)))


def anisotropy(table: EmbeddingTable) -> float:
    """Mean pairwise cosine similarity over all ordered pairs i != j."""
    norms = np.linalg.norm(table.vectors, axis=1)
    if np.any(norms == 0):
        raise ConfigurationError("anisotropy undefined: zero-norm embedding row")
    unit = table.vectors / norms[:, None]
    colsum = unit.sum(axis=0)
    total = float(colsum @ colsum)          # sum over all ordered pairs incl. i == j
    diag = float((unit * unit).sum())       # sum of self-cosines
    V = table.V
    return (total - diag) / (V * (V - 1))


def log_softmax_entry(logits: np.ndarray, index: int) -> float:
    """log softmax(logits)[index], computed stably."""
    m = float(np.max(logits))
    lse = m + float(np.log(np.sum(np.exp(logits - m))))
    return float(logits[index]) - lse


def classification_loss(z: np.ndarray, y: int, table: EmbeddingTable) -> float:
    """Mean-square distance to e_y plus the rounding negative log-likelihood.

    This is the per-position score the degenerated classifier minimizes over
    the vocabulary.
    """
    if not 0 <= y < table.V:
        raise ShapeError(f"token index {y} out of range [0, {table.V})")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (table.d,):
        raise ShapeError(f"expected a vector of dimension {table.d}")
    diff = z - table.vectors[y]
    msd = float((diff * diff).mean())
    nll = -log_softmax_entry(round_logits(z, table), y)
    return msd + nll
