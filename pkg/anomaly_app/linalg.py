"""
Numerical kernels shared by the detectors: Cholesky factorization,
triangular solves, Woodbury inverse updates, batched Welford statistics and
power-iteration eigendecomposition. All functions are pure.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .exceptions import FactorizationError, SingularSolveError, UpdateInstabilityError

logger = logging.getLogger(__name__)

# Woodbury denominators smaller than this, relative to their scale, are unstable
WOODBURY_RTOL = 1e-12


@dataclass(frozen=True)
class InverseState:
    """Running inverse of a covariance or correlation matrix"""
    matrix: np.ndarray
    n: int = 0

    @property
    def dim(self):
        return self.matrix.shape[0]

    def with_matrix(self, matrix, n=None):
        return InverseState(matrix=matrix, n=self.n if n is None else n)


class EigenResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray
    converged: np.ndarray

    @property
    def all_converged(self):
        return bool(np.all(self.converged))


def symmetrize(A):
    return 0.5 * (A + A.T)


def cholesky_lower(A):
    """Lower-triangular L with L @ L.T == A, for symmetric positive definite A."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise FactorizationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise FactorizationError("matrix contains NaN or Inf")
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        # LAPACK reports the 1-based order of the failing leading minor
        raise FactorizationError(
            f"matrix is not positive definite: pivot {info - 1} is non-positive",
            pivot=info - 1,
        )
    if info < 0:
        raise FactorizationError(f"illegal value in argument {-info} to dpotrf")
    return L


def forward_substitute(L, v):
    """Solve L @ m = v for m. v may be a vector or a matrix of column right-hand sides."""
    L = np.asarray(L, dtype=np.float64)
    diag = np.abs(np.diag(L))
    if diag.size == 0 or diag.min() == 0.0:
        raise SingularSolveError("lower-triangular factor has a zero on its diagonal")
    return solve_triangular(L, v, lower=True, check_finite=False)


def woodbury_rank1(Ainv, u, c=1.0):
    """
    Inverse of (A + c u u^T) given A^{-1}.

    Accepts either an InverseState or a bare matrix and returns the same kind.
    """
    state = Ainv if isinstance(Ainv, InverseState) else None
    M = state.matrix if state is not None else np.asarray(Ainv, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if not np.any(u) or c == 0:
        return Ainv

    Au = M @ u
    denom = 1.0 / c + u @ Au
    scale = abs(1.0 / c) + abs(u @ Au)
    if abs(denom) < WOODBURY_RTOL * scale:
        raise UpdateInstabilityError(
            f"rank-1 Woodbury denominator {denom:.3e} vanishes relative to {scale:.3e}"
        )
    result = symmetrize(M - np.outer(Au, Au) / denom)
    if state is not None:
        return state.with_matrix(result, n=state.n + 1)
    return result


def woodbury_block(Rinv, X):
    """
    Inverse of (R + X^T X) given R^{-1}, for a block X of k new rows.

    The inner system I + X R^{-1} X^T is k x k; normalization of R is left to
    the caller.
    """
    state = Rinv if isinstance(Rinv, InverseState) else None
    M = state.matrix if state is not None else np.asarray(Rinv, dtype=np.float64)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    k = X.shape[0] if X.size else 0
    if k == 0:
        return Rinv

    MXt = M @ X.T
    inner = np.eye(k) + X @ MXt
    try:
        # inner is SPD whenever M is; Cholesky doubles as the stability check
        factor = cholesky_lower(symmetrize(inner))
    except FactorizationError as exc:
        raise UpdateInstabilityError(f"block Woodbury inner system is singular: {exc}") from exc
    diag = np.diag(factor)
    if diag.min() < np.sqrt(WOODBURY_RTOL) * diag.max():
        raise UpdateInstabilityError("block Woodbury inner system is ill-conditioned")

    G = solve_triangular(factor, MXt.T, lower=True, check_finite=False)
    result = symmetrize(M - G.T @ G)
    if state is not None:
        return state.with_matrix(result, n=state.n + k)
    return result


def welford_batch_update(mean, cov, n_seen, X):
    """
    Fold a batch of rows into a running mean and sample covariance.

    cov is the unbiased (1/(n-1)) covariance of everything seen so far; with a
    single row seen it is the zero matrix.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    k = X.shape[0]
    if k < 1:
        raise ValueError("welford_batch_update needs at least one row")

    batch_mean = X.mean(axis=0)
    centered = X - batch_mean
    batch_m2 = centered.T @ centered

    if n_seen == 0:
        total = k
        new_mean = batch_mean
        m2 = batch_m2
    else:
        total = n_seen + k
        delta = batch_mean - mean
        new_mean = mean + delta * (k / total)
        m2 = cov * (n_seen - 1) + batch_m2 + np.outer(delta, delta) * (n_seen * k / total)

    new_cov = m2 / (total - 1) if total > 1 else np.zeros_like(batch_m2)
    return new_mean, symmetrize(new_cov), total


def _fix_sign(v):
    pivot = np.argmax(np.abs(v))
    return -v if v[pivot] < 0 else v


def power_deflation_eigs(K, k, warm_start=None, max_iter=100, rq_tol=1e-8,
                         residual_tol=1e-6, seed=0):
    """
    Top-k eigenpairs of a symmetric PSD matrix by power iteration with
    Hotelling deflation.

    Each pair stops once successive Rayleigh quotients agree to rq_tol
    (relative) and the residual ||K v - e v|| is within residual_tol * ||K||_F.
    Pairs that hit max_iter are returned as their best iterate with
    converged False.
    """
    K = symmetrize(np.asarray(K, dtype=np.float64))
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    # Frobenius norm bounds the spectral norm
    norm_K = np.linalg.norm(K)
    scale = norm_K if norm_K > 0 else 1.0
    rng = np.random.default_rng(seed)
    deflated = K.copy()
    values = np.zeros(k)
    vectors = np.zeros((n, k))
    converged = np.zeros(k, dtype=bool)

    for j in range(k):
        if warm_start is not None and warm_start.shape[1] > j:
            v = np.array(warm_start[:, j], dtype=np.float64)
        else:
            v = rng.standard_normal(n)
        v = _orthogonalize(v, vectors[:, :j])
        if np.linalg.norm(v) == 0:
            v = _orthogonalize(rng.standard_normal(n), vectors[:, :j])
        v /= np.linalg.norm(v)

        rq = v @ deflated @ v
        for _ in range(max_iter):
            w = _orthogonalize(deflated @ v, vectors[:, :j])
            w_norm = np.linalg.norm(w)
            if w_norm == 0:
                # v lies in the null space of what is left
                rq = 0.0
                converged[j] = True
                break
            v = w / w_norm
            new_rq = v @ deflated @ v
            residual = np.linalg.norm(deflated @ v - new_rq * v)
            settled = abs(new_rq - rq) <= rq_tol * max(abs(new_rq), 1e-300)
            rq = new_rq
            if settled and residual <= residual_tol * scale:
                converged[j] = True
                break
        else:
            residual = np.linalg.norm(deflated @ v - rq * v)
            converged[j] = residual <= residual_tol * scale
            if not converged[j]:
                logger.debug("eigenpair %d did not converge in %d iterations", j, max_iter)

        v = _fix_sign(v)
        values[j] = max(rq, 0.0)
        vectors[:, j] = v
        deflated = deflated - rq * np.outer(v, v)

    return EigenResult(values=values, vectors=vectors, converged=converged)


def _orthogonalize(v, basis):
    if basis.shape[1] == 0:
        return v
    v = v - basis @ (basis.T @ v)
    # second pass keeps columns orthonormal to round-off
    return v - basis @ (basis.T @ v)
