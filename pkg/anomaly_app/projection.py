"""
Sparse random projection.

The weight matrix W (b x d) is drawn once per detector from PCG64
(numpy.random.default_rng), so a seed reproduces W bit for bit. Entries are
+-sqrt(s)/sqrt(d) with probability 1/(2s) each and 0 otherwise, with
sparsity s = sqrt(b).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class SrpMatrix:
    weights: np.ndarray
    seed: Optional[int]
    sparsity: float
    magnitude: float

    @property
    def bands(self):
        return self.weights.shape[0]

    @property
    def dims(self):
        return self.weights.shape[1]

    @property
    def nonzero_count(self):
        return int(np.count_nonzero(self.weights))

    @property
    def is_identity(self):
        return self.seed is None


def generate_srp(b, d, seed):
    """Draw a b x d sparse random projection matrix."""
    if b < 1 or d < 1:
        raise ConfigurationError(f"bands and dims must be >= 1, got b={b}, d={d}")
    s = math.sqrt(b)
    magnitude = math.sqrt(s) / math.sqrt(d)
    rng = np.random.default_rng(seed)
    u = rng.random((b, d))
    weights = np.zeros((b, d), dtype=np.float64)
    weights[u < 1.0 / (2.0 * s)] = magnitude
    weights[(u >= 1.0 / (2.0 * s)) & (u < 1.0 / s)] = -magnitude
    weights.setflags(write=False)
    return SrpMatrix(weights=weights, seed=seed, sparsity=s, magnitude=magnitude)


def identity_selector(b):
    """Pass-through 'projection' used when SRP is switched off"""
    weights = np.eye(b)
    weights.setflags(write=False)
    return SrpMatrix(weights=weights, seed=None, sparsity=1.0, magnitude=1.0)


def project_line(X, W):
    """Z = X @ W for a p x b line. Accepts a SpectralLine or a bare array."""
    pixels = getattr(X, 'pixels', X)
    pixels = np.asarray(pixels, dtype=np.float64)
    weights = W.weights if isinstance(W, SrpMatrix) else np.asarray(W, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[1] != weights.shape[0]:
        raise ConfigurationError(
            f"line with {pixels.shape[-1]} bands cannot be projected by a "
            f"{weights.shape[0]} x {weights.shape[1]} matrix"
        )
    if isinstance(W, SrpMatrix) and W.is_identity:
        return pixels
    return pixels @ weights
