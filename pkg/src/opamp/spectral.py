"""Deflated spectral norms: dense eigen/singular values and seeded block power iteration."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ._errors import ConvergenceError, DomainError

MAX_ITER = 50_000


@dataclass(frozen=True)
class SpectralReport:
    """Measured lambda (max nontrivial |eigenvalue| or deflated top singular value)."""

    value: float
    method: str
    residual: float = 0.0
    iterations: int = 0
    directed: bool = False

    @property
    def lam(self):
        return self.value


def deflated_dense(A, symmetric=True):
    """Spectral norm of A restricted to the complement of the all-ones vector."""
    A = np.asarray(A)
    n = len(A)
    if n <= 1:
        return 0.0
    B = A - A.mean(axis=0, keepdims=True)
    B = B - B.mean(axis=1, keepdims=True)
    if symmetric:
        ev = np.linalg.eigvalsh((B + B.conj().T) / 2)
        val = float(np.max(np.abs(ev)))
    else:
        val = float(np.linalg.svd(B, compute_uv=False)[0])
    return min(val, 1.0) if val < 1.0 + 1e-12 else val


def _deflate(X):
    return X - X.sum(axis=0, keepdims=True) / X.shape[0]


def _lanczos(apply, n, tol, seed, deflate, dtype):
    """Implicitly restarted Lanczos (ARPACK) for the top pair, then an explicit residual check."""
    from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

    def mv(v):
        v = v.reshape(n, -1)
        if deflate:
            v = _deflate(v)
        w = apply(v)
        if deflate:
            w = _deflate(w)
        return w

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n).astype(dtype)
    if deflate:
        v0 = v0 - v0.mean()
    op = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=dtype)
    try:
        w, V = eigsh(op, k=1, which="LA", v0=v0, tol=tol / 10, maxiter=MAX_ITER)
    except (ArpackNoConvergence, ArpackError):
        return None
    v = V[:, :1]
    v = v / np.linalg.norm(v)
    theta = float(w[0])
    r = float(np.linalg.norm(mv(v) - theta * v))
    return theta, r


def _lanczos_both_ends(apply, n, tol, seed):
    """Largest and smallest eigenvalue of the deflated symmetric operator in one ARPACK run.

    Krylov starts are not trapped the way a single power-iteration start can be, so
    one seed suffices; both Ritz pairs must pass the residual check or None is returned.
    """
    from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh

    def mv(v):
        w = apply(_deflate(v.reshape(n, -1)))
        return _deflate(w)

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    v0 -= v0.mean()
    op = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=np.float64)
    try:
        w, V = eigsh(op, k=2, which="BE", v0=v0, tol=tol / 10, maxiter=MAX_ITER)
    except (ArpackNoConvergence, ArpackError):
        return None
    V = V / np.linalg.norm(V, axis=0)
    res = float(np.max(np.linalg.norm(mv(V) - V * w[None, :], axis=0)))
    if res > tol:
        return None
    return float(np.max(np.abs(w))), res


def top_psd(apply, n, tol, seed, *, deflate=True, block=8, max_iter=MAX_ITER, dtype=np.float64, lanczos=True,
            inner_steps=4):
    """Top eigenvalue of a PSD operator (optionally on the complement of ones).

    Lanczos first; if its residual misses ``tol``, subspace iteration with
    Rayleigh-Ritz (every ``inner_steps`` applications) until the leading Ritz
    residual is at most ``tol``.  Returns (theta, residual, Rayleigh-Ritz rounds).
    """
    dim = n - 1 if deflate else n
    if dim <= 0:
        return 0.0, 0.0, 0
    if dim > 2 and lanczos:
        got = _lanczos(apply, n, tol, seed, deflate, dtype)
        if got is not None and got[1] <= tol:
            return got[0], got[1], 1
    b = max(1, min(block, dim))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, b))
    if np.issubdtype(dtype, np.complexfloating):
        X = X + 1j * rng.standard_normal((n, b))
    if deflate:
        X = _deflate(X)
    X, _ = np.linalg.qr(X)
    best = (0.0, np.inf)
    for it in range(1, max_iter + 1):
        Y = apply(X)
        if deflate:
            Y = _deflate(Y)
        H = X.conj().T @ Y
        H = (H + H.conj().T) / 2
        w, V = sla.eigh(H, check_finite=False)
        theta = float(w[-1])
        v = V[:, -1]
        r = float(np.linalg.norm(Y @ v - theta * (X @ v)))
        if r < best[1] or it == 1:
            best = (theta, r)
        if r <= tol:
            return theta, r, it
        # extra applications between orthonormalizations; the residual test stays on A itself
        Z = Y @ V[:, ::-1]
        for _ in range(inner_steps - 1):
            Z = apply(Z)
            if deflate:
                Z = _deflate(Z)
        X, R = sla.qr(Z, mode="economic", check_finite=False)
        if np.min(np.abs(np.diag(R))) < 1e-300:
            # invariant subspace smaller than the block: refill from the seed stream
            Z = Z + 1e-8 * rng.standard_normal(Z.shape)
            X = sla.qr(_deflate(Z) if deflate else Z, mode="economic", check_finite=False)[0]
    raise ConvergenceError("power iteration did not converge", estimate=best[0], residual=best[1],
                           iterations=max_iter)


def deflated_power(apply, apply_t, n, *, symmetric=True, tol=1e-9, seed=0, max_iter=MAX_ITER, method="auto"):
    """Power-iteration estimate of the deflated spectral norm of a doubly stochastic operator.

    Symmetric operators: top eigenvalues of (I+A)/2 and (I-A)/2, which gives
    lambda_2 and lambda_n without sign ambiguity.  Otherwise the top singular
    value via B^T B.  A second run from a shifted seed guards against an
    unlucky start; the larger estimate is kept.  ``method="auto"`` first tries one
    two-sided Lanczos run on symmetric operators; ``method="power"`` skips it.
    """
    if tol <= 0:
        raise DomainError("tol must be > 0")
    if method not in ("auto", "power"):
        raise DomainError(f"unknown method {method!r}")
    if method == "auto" and symmetric and n > 3:
        got = _lanczos_both_ends(apply, n, tol, seed)
        if got is not None:
            return SpectralReport(min(got[0], 1.0), "lanczos", got[1], 1, False)
    best_val, best_res, iters = -1.0, 0.0, 0
    for s in (seed, seed + 1):
        if symmetric:
            hi, r_hi, i_hi = top_psd(lambda X: (X + apply(X)) / 2, n, tol / 2, s, max_iter=max_iter,
                                     lanczos=method == "auto")
            lo, r_lo, i_lo = top_psd(lambda X: (X - apply(X)) / 2, n, tol / 2, s, max_iter=max_iter,
                                     lanczos=method == "auto")
            val = max(2 * hi - 1, 2 * lo - 1, 0.0)
            res = 2 * max(r_hi, r_lo)
            it = i_hi + i_lo
        else:
            sq, res, it = top_psd(lambda X: apply_t(_deflate(apply(X))), n, tol, s, max_iter=max_iter,
                                  lanczos=method == "auto")
            val = float(np.sqrt(max(sq, 0.0)))
        iters += it
        if val > best_val:
            best_val, best_res = val, res
    return SpectralReport(min(best_val, 1.0), "power-iteration", best_res, iters, not symmetric)
