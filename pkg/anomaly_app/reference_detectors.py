"""
Comparison detectors: rolling-buffer RX, RT-CK-RXD (pixel-wise Woodbury on
the covariance), RX-BIL (line-wise Woodbury on the correlation with random
pixel discard) and LBL-AD (power-iteration subspace projection).
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import CausalLineDetector, LineDetector, ScoredLine, normalize_scores
from .exceptions import ConfigurationError, FactorizationError, UpdateInstabilityError
from .linalg import (
    InverseState,
    cholesky_lower,
    forward_substitute,
    power_deflation_eigs,
    symmetrize,
    welford_batch_update,
    woodbury_block,
    woodbury_rank1,
)

logger = logging.getLogger(__name__)

EIGEN_FLOOR = 1e-10


def regularized_inverse(M, epsilon):
    """Inverse of an SPD matrix, adding eps*I only when M itself is not PD"""
    M = symmetrize(np.asarray(M, dtype=np.float64))
    eye = np.eye(M.shape[0])
    try:
        factor = cho_factor(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        logger.debug("singular seed matrix, regularizing with %g", epsilon)
        factor = cho_factor(M + epsilon * eye, lower=True, check_finite=False)
    return symmetrize(cho_solve(factor, eye, check_finite=False))


@dataclass
class _BufferedLine:
    index: int
    pixels: np.ndarray
    mean: np.ndarray
    m2: np.ndarray


class RollingBuffer:
    """Fixed-capacity FIFO of the most recent lines with their centred moments"""

    def __init__(self, capacity):
        if capacity < 1:
            raise ConfigurationError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.entries = deque(maxlen=capacity)

    def push(self, line):
        X = np.asarray(line.pixels, dtype=np.float64)
        mean = X.mean(axis=0)
        centered = X - mean
        self.entries.append(_BufferedLine(line.index, X, mean, centered.T @ centered))

    @property
    def full(self):
        return len(self.entries) == self.capacity

    def __len__(self):
        return len(self.entries)

    def centre(self):
        return self.entries[self.capacity // 2]

    def statistics(self):
        """Mean and 1/n covariance over every buffered pixel"""
        counts = np.array([e.pixels.shape[0] for e in self.entries], dtype=np.float64)
        means = np.stack([e.mean for e in self.entries])
        n = counts.sum()
        mean = counts @ means / n
        spread = means - mean
        m2 = sum(e.m2 for e in self.entries) + (spread * counts[:, None]).T @ spread
        return mean, symmetrize(m2 / n)


def rx_baseline_score(buffer, new_line, epsilon=1e-5):
    """
    Push new_line and, once the buffer is full, score its centre line with
    the buffer's mean and covariance. Returns None until the buffer fills.
    """
    buffer.push(new_line)
    if not buffer.full:
        return None
    mean, cov = buffer.statistics()
    try:
        L = cholesky_lower(cov)
    except FactorizationError:
        logger.debug("singular buffer covariance, regularizing with %g", epsilon)
        L = cholesky_lower(cov + epsilon * np.eye(cov.shape[0]))
    centre = buffer.centre()
    m = forward_substitute(L, (centre.pixels - mean).T)
    return ScoredLine.from_distances(centre.index, np.sqrt(np.einsum('ij,ij->j', m, m)))


class RxBaselineDetector(LineDetector):
    """
    RX over a rolling buffer, applied to the buffer's centre line.

    Emission lags by half a buffer; lines before the first centre and after
    the last one are emitted unscored.
    """
    name = 'rx-baseline'

    def __init__(self, buffer_len=99, epsilon=1e-5):
        self.buffer_len = buffer_len
        self.epsilon = epsilon

    def run(self, lines):
        buffer = RollingBuffer(self.buffer_len)
        lead = self.buffer_len // 2
        pending = deque()
        for line in lines:
            if line.index < lead:
                yield ScoredLine.unscored(line.index, line.p)
            else:
                pending.append(line)
            scored = rx_baseline_score(buffer, line, self.epsilon)
            if scored is not None:
                pending.popleft()
                yield scored
        for line in pending:
            yield ScoredLine.unscored(line.index, line.p)

    def config_snapshot(self):
        return {'detector': self.name, 'buffer_len': self.buffer_len, 'epsilon': self.epsilon}


@dataclass
class CovarianceState:
    """Running mean and inverse covariance for the pixel-wise recursion"""
    mean: np.ndarray
    Kinv: InverseState
    skipped: int = 0

    @property
    def n(self):
        return self.Kinv.n


def rtckrxd_score(state, new_line):
    """
    Score each pixel against the current statistics, then fold it in with a
    rank-1 Woodbury update of n/(n+1) K + n/(n+1)^2 (x - mu)(x - mu)^T.
    """
    X = np.asarray(new_line.pixels, dtype=np.float64)
    distances = np.empty(X.shape[0])
    skipped = 0
    mean, Kinv, n = state.mean, state.Kinv.matrix, state.n
    for i, x in enumerate(X):
        deviation = x - mean
        distances[i] = math.sqrt(max(deviation @ Kinv @ deviation, 0.0))

        n_next = n + 1
        mean_next = mean + deviation / n_next
        u = (x - mean_next) / math.sqrt(n)
        try:
            Kinv = woodbury_rank1(Kinv * (n_next / n), u, 1.0)
        except UpdateInstabilityError:
            skipped += 1
            continue
        mean, n = mean_next, n_next

    if skipped:
        logger.debug("line %d: skipped %d unstable pixel updates", new_line.index, skipped)
    state.mean = mean
    state.Kinv = InverseState(matrix=Kinv, n=n)
    state.skipped += skipped
    scored = ScoredLine.from_distances(new_line.index, distances, flagged=skipped > 0)
    return scored, state


class RtCkRxdDetector(CausalLineDetector):
    """Seeds from the first buffer_len lines, then updates pixel by pixel"""
    name = 'rt-ck-rxd'

    def __init__(self, buffer_len=99, epsilon=1e-5):
        self.buffer_len = buffer_len
        self.epsilon = epsilon
        self.state: Optional[CovarianceState] = None
        self._seed_mean = None
        self._seed_cov = None
        self._seed_n = 0

    def score_line(self, line):
        if self.state is None:
            self._seed_mean, self._seed_cov, self._seed_n = welford_batch_update(
                self._seed_mean, self._seed_cov, self._seed_n, line.pixels)
            if line.index >= self.buffer_len - 1:
                self._seed()
            return ScoredLine.unscored(line.index, line.p)
        scored, self.state = rtckrxd_score(self.state, line)
        return scored

    def _seed(self):
        n = self._seed_n
        cov = self._seed_cov * ((n - 1) / n)
        Kinv = regularized_inverse(cov, self.epsilon)
        self.state = CovarianceState(mean=self._seed_mean, Kinv=InverseState(Kinv, n=n))

    def config_snapshot(self):
        return {'detector': self.name, 'buffer_len': self.buffer_len, 'epsilon': self.epsilon}


@dataclass
class CorrelationState:
    """Inverse of the un-normalized correlation sum S = sum x x^T, and its pixel count"""
    Sinv: InverseState
    skipped: int = 0

    @property
    def n(self):
        return self.Sinv.n

    @property
    def Rinv(self):
        """Inverse of the normalized correlation S / n"""
        return self.Sinv.matrix * self.n


def rxbil_init(first_line, epsilon=1e-5):
    X = np.asarray(first_line.pixels, dtype=np.float64)
    Sinv = regularized_inverse(X.T @ X, epsilon)
    return CorrelationState(Sinv=InverseState(Sinv, n=X.shape[0]))


def fold_rows(Sinv, rows, chunk=32):
    """
    Block-Woodbury update with rows in chunks of at most `chunk`.

    A chunk whose inner system is singular is halved and retried; a single
    failing row is skipped. Returns the new state and the skip count.
    """
    skipped = 0
    start = 0
    size = chunk
    while start < rows.shape[0]:
        block = rows[start:start + size]
        try:
            Sinv = woodbury_block(Sinv, block)
        except UpdateInstabilityError:
            if size == 1:
                skipped += 1
                start += 1
            else:
                size = max(1, size // 2)
            continue
        start += block.shape[0]
        size = chunk
    return Sinv, skipped


def rxbil_score(state, new_line, eta=0.5, rng=None, chunk=32):
    """
    Score every pixel with sqrt(x^T R^{-1} x), then fold a random
    ceil(p * (1 - eta)) subset of the line into the correlation.
    """
    X = np.asarray(new_line.pixels, dtype=np.float64)
    p = X.shape[0]
    quad = np.einsum('ij,jk,ik->i', X, state.Rinv, X)
    distances = np.sqrt(np.maximum(quad, 0.0))

    keep = math.ceil(p * (1.0 - eta))
    skipped = 0
    if keep > 0:
        rng = rng if rng is not None else np.random.default_rng()
        retained = np.sort(rng.choice(p, size=keep, replace=False))
        state.Sinv, skipped = fold_rows(state.Sinv, X[retained], chunk)
        state.skipped += skipped
        if skipped:
            logger.debug("line %d: skipped %d unstable pixel updates", new_line.index, skipped)
    scored = ScoredLine.from_distances(new_line.index, distances, flagged=skipped > 0)
    return scored, state


class RxBilDetector(CausalLineDetector):
    name = 'rx-bil'

    def __init__(self, buffer_len=99, eta=0.5, seed=0, chunk=32, epsilon=1e-5):
        if not 0 <= eta <= 1:
            raise ConfigurationError(f"eta must be in [0, 1], got {eta}")
        if chunk < 1:
            raise ConfigurationError(f"chunk must be >= 1, got {chunk}")
        self.buffer_len = buffer_len
        self.eta = eta
        self.seed = seed
        self.chunk = chunk
        self.epsilon = epsilon
        self.rng = np.random.default_rng(seed)
        self.state: Optional[CorrelationState] = None

    def score_line(self, line):
        warmup = line.index < self.buffer_len
        if self.state is None:
            self.state = rxbil_init(line, self.epsilon)
            X = np.asarray(line.pixels, dtype=np.float64)
            quad = np.einsum('ij,jk,ik->i', X, self.state.Rinv, X)
            return ScoredLine.from_distances(line.index, np.sqrt(np.maximum(quad, 0.0)),
                                             warmup=warmup)
        scored, self.state = rxbil_score(self.state, line, self.eta, self.rng, self.chunk)
        scored.warmup = warmup
        return scored

    def config_snapshot(self):
        return {
            'detector': self.name,
            'buffer_len': self.buffer_len,
            'eta': self.eta,
            'seed': self.seed,
            'chunk': self.chunk,
        }


@dataclass
class SubspaceState:
    """Running background statistics and their leading eigenpairs"""
    mean: np.ndarray
    cov: np.ndarray
    n: int
    values: np.ndarray
    vectors: np.ndarray
    reused: int = 0
    excluded: int = 0

    @property
    def k(self):
        return self.values.shape[0]


def subspace_distances(X, mean, values, vectors):
    """Reduced Mahalanobis distance sqrt(z diag(e)^{-1} z^T) with z = E^T (x - mu)"""
    Z = (np.asarray(X, dtype=np.float64) - mean) @ vectors
    return np.sqrt(np.einsum('ij,j->i', Z * Z, 1.0 / np.maximum(values, EIGEN_FLOOR)))


def lblad_score(state, new_line, k=3, adaptive_exclude=False, exclude_score=3.0, max_iter=100):
    """
    Fold the line into the running covariance, refresh the eigenpairs from a
    warm start, and score the line in the reduced subspace.

    With adaptive_exclude, the line is first scored against the previous
    eigensystem and pixels whose normalized score exceeds exclude_score are
    kept out of the update.
    """
    X = np.asarray(new_line.pixels, dtype=np.float64)
    rows = X
    if adaptive_exclude:
        prior = normalize_scores(subspace_distances(X, state.mean, state.values, state.vectors))
        rows = X[prior <= exclude_score]
        state.excluded += X.shape[0] - rows.shape[0]
    if rows.shape[0]:
        state.mean, state.cov, state.n = welford_batch_update(state.mean, state.cov, state.n, rows)

    eig = power_deflation_eigs(state.cov, k, warm_start=state.vectors, max_iter=max_iter)
    flagged = not eig.all_converged
    if flagged:
        state.reused += 1
        logger.debug("line %d: eigenpairs did not converge, reusing previous", new_line.index)
    else:
        state.values, state.vectors = eig.values, eig.vectors

    scored = ScoredLine.from_distances(
        new_line.index, subspace_distances(X, state.mean, state.values, state.vectors),
        flagged=flagged,
    )
    return scored, state


class LblAdDetector(CausalLineDetector):
    name = 'lbl-ad'

    def __init__(self, buffer_len=99, k=3, adaptive_exclude=False, exclude_score=3.0,
                 max_iter=100):
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        self.buffer_len = buffer_len
        self.k = k
        self.adaptive_exclude = adaptive_exclude
        self.exclude_score = exclude_score
        self.max_iter = max_iter
        self.state: Optional[SubspaceState] = None
        self._seed_mean = None
        self._seed_cov = None
        self._seed_n = 0

    def score_line(self, line):
        if self.state is None:
            if self.k > line.b:
                raise ConfigurationError(f"k={self.k} exceeds the {line.b} available bands")
            self._seed_mean, self._seed_cov, self._seed_n = welford_batch_update(
                self._seed_mean, self._seed_cov, self._seed_n, line.pixels)
            if line.index >= self.buffer_len - 1:
                eig = power_deflation_eigs(self._seed_cov, self.k, max_iter=self.max_iter)
                self.state = SubspaceState(
                    mean=self._seed_mean, cov=self._seed_cov, n=self._seed_n,
                    values=eig.values, vectors=eig.vectors,
                )
            return ScoredLine.unscored(line.index, line.p)
        scored, self.state = lblad_score(self.state, line, self.k, self.adaptive_exclude,
                                         self.exclude_score, self.max_iter)
        return scored

    def config_snapshot(self):
        return {
            'detector': self.name,
            'buffer_len': self.buffer_len,
            'k': self.k,
            'adaptive_exclude': self.adaptive_exclude,
            'exclude_score': self.exclude_score,
        }
