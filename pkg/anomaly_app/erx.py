"""
Exponentially moving RX (ERX).

Each line is projected with a fixed sparse random matrix, scored against the
background mean and covariance accumulated over the previous lines, and then
folded into those statistics with an exponential moving average. Distances
come from a Cholesky factor of K + eps*I and one forward substitution per
line, so no inverse is ever formed. Note the factor is of the regularized
covariance itself, not of its inverse.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import CausalLineDetector, ScoredLine
from .exceptions import ConfigurationError, DegenerateLineError, FactorizationError
from .linalg import cholesky_lower, forward_substitute, symmetrize, welford_batch_update
from .projection import SrpMatrix, generate_srp, identity_selector, project_line

logger = logging.getLogger(__name__)

MAX_EPSILON = 1e-1


@dataclass(frozen=True)
class ErxConfig:
    d: int = 5
    alpha: float = 0.1
    buffer_len: int = 99
    epsilon: float = 1e-5
    seed: int = 0
    no_srp: bool = False
    use_incremental: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.d < 1:
            raise ConfigurationError(f"d must be >= 1, got {self.d}")
        if self.buffer_len < 1:
            raise ConfigurationError(f"buffer_len must be >= 1, got {self.buffer_len}")


@dataclass(frozen=True)
class ErxState:
    W: SrpMatrix
    mu: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    t: int = 0
    welford_n: int = 0

    @property
    def initialized(self):
        return self.mu is not None

    @property
    def d(self):
        return self.W.dims


def erx_init(cfg, b):
    """Fresh state for a b-band stream; statistics stay empty until the first line."""
    if cfg.no_srp:
        W = identity_selector(b)
    else:
        if cfg.d > b:
            logger.debug("projecting %d bands up to %d dimensions", b, cfg.d)
        W = generate_srp(b, cfg.d, cfg.seed)
    return ErxState(W=W)


def line_stats(Z):
    """Column mean and unbiased (1/(p-1)) covariance of a projected line."""
    Z = np.asarray(Z, dtype=np.float64)
    p = Z.shape[0]
    if p < 2:
        raise DegenerateLineError(f"line covariance needs at least 2 pixels, got {p}")
    mu_hat = Z.mean(axis=0)
    centered = Z - mu_hat
    K_hat = centered.T @ centered / (p - 1)
    return mu_hat, symmetrize(K_hat)


def ema_update(state, mu_hat, K_hat, alpha):
    mu = (1.0 - alpha) * state.mu + alpha * mu_hat
    K = (1.0 - alpha) * state.K + alpha * K_hat
    return replace(state, mu=mu, K=symmetrize(K))


def incremental_update(state, Z):
    """Equal-weight alternative to ema_update over every pixel seen so far"""
    mu, K, n = welford_batch_update(state.mu, state.K, state.welford_n, Z)
    return replace(state, mu=mu, K=K, welford_n=n)


def regularized_cholesky(K, epsilon):
    """
    Cholesky factor of K + eps*I, escalating eps tenfold up to 0.1.

    Returns the factor and the epsilon that succeeded.
    """
    eye = np.eye(K.shape[0])
    eps = epsilon
    while True:
        try:
            return cholesky_lower(K + eps * eye), eps
        except FactorizationError as exc:
            if eps * 10 > MAX_EPSILON * (1 + 1e-9):
                raise FactorizationError(
                    f"covariance stays indefinite with regularization {eps:g}",
                    pivot=exc.pivot,
                ) from exc
            eps *= 10
            logger.debug("regularization escalated to %g", eps)


def mahalanobis_distances(Z, mu, L):
    """sqrt((z - mu)^T (L L^T)^{-1} (z - mu)) for every row z of Z"""
    m = forward_substitute(L, (Z - mu).T)
    return np.sqrt(np.einsum('ij,ij->j', m, m))


def erx_score_line(state, X, cfg):
    """
    Score one line against the background seen so far, then update it.

    The first line of a stream seeds the background with its own statistics.
    """
    Z = project_line(X, state.W)
    index = getattr(X, 'index', state.t)

    first = not state.initialized
    if first:
        mu_hat, K_hat = line_stats(Z)
        state = replace(state, mu=mu_hat, K=K_hat, welford_n=Z.shape[0])

    L, _ = regularized_cholesky(state.K, cfg.epsilon)
    distances = mahalanobis_distances(Z, state.mu, L)
    scored = ScoredLine.from_distances(index, distances, warmup=state.t < cfg.buffer_len)

    if not first:
        if cfg.use_incremental:
            state = incremental_update(state, Z)
        else:
            mu_hat, K_hat = line_stats(Z)
            state = ema_update(state, mu_hat, K_hat, cfg.alpha)
    return scored, replace(state, t=state.t + 1)


def apply_threshold(norm_scores, tau_N):
    """1 where the normalized score reaches tau_N"""
    return (np.asarray(norm_scores) >= tau_N).astype(np.uint8)


class ErxDetector(CausalLineDetector):
    name = 'erx'

    def __init__(self, cfg, bands):
        self.cfg = cfg
        self.bands = bands
        self.state = erx_init(cfg, bands)

    def score_line(self, line):
        scored, self.state = erx_score_line(self.state, line, self.cfg)
        return scored

    def config_snapshot(self):
        return {
            'detector': self.name,
            'd': self.state.d,
            'alpha': self.cfg.alpha,
            'buffer_len': self.cfg.buffer_len,
            'epsilon': self.cfg.epsilon,
            'seed': self.cfg.seed,
            'no_srp': self.cfg.no_srp,
            'use_incremental': self.cfg.use_incremental,
        }
