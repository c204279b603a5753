"""Operator-valued vertex labelings f: V -> M_l(C), the block operator Pi_f and its norm checks.

A vector of H (x) C[V] is stored as an (n, l) complex array whose row x is the
H-component at vertex x; flattened, vertex x occupies entries x*l .. x*l+l-1.
"""
import numpy as np
import scipy.linalg

from . import _config
from ._errors import CapacityError, DomainError
from ._validation import check_graph
from .spectral import top_psd

NORM_SLACK = 1e-9
DENSE_ELL = 256


def _opnorm(M, tol=1e-12, seed=0):
    M = np.asarray(M)
    if M.shape[0] <= DENSE_ELL:
        return float(np.linalg.norm(M, 2))
    MH = M.conj().T
    sq, _, _ = top_psd(lambda X: MH @ (M @ X), M.shape[1], tol, seed, deflate=False, dtype=np.complex128)
    return float(np.sqrt(max(sq, 0.0)))


class OperatorFunction:
    """f(x) = mats[x] for x in [n]; every f(x) has operator norm at most 1."""

    def __init__(self, mats, *, check=True):
        mats = np.array(mats, dtype=np.complex128)
        if mats.ndim == 1:
            mats = mats[:, None, None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DomainError("mats must have shape (n, l, l)")
        if mats.shape[0] == 0:
            raise DomainError("operator function needs at least one vertex")
        if check:
            worst = float(np.max(np.linalg.norm(mats, 2, axis=(1, 2))))
            if worst > 1 + NORM_SLACK:
                raise DomainError(f"max ||f(x)|| = {worst} exceeds 1")
        mats.flags.writeable = False
        self.mats = mats

    @property
    def n(self):
        return self.mats.shape[0]

    @property
    def ell(self):
        return self.mats.shape[1]

    def __repr__(self):
        return f"OperatorFunction(n={self.n}, ell={self.ell})"

    def mean(self):
        return self.mats.mean(axis=0)

    def max_norm(self):
        return float(np.max(np.linalg.norm(self.mats, 2, axis=(1, 2))))

    def is_unitary(self, tol=1e-6):
        sv = np.linalg.svd(self.mats, compute_uv=False)
        return bool(np.max(np.abs(sv - 1.0)) <= tol)

    def bias_operator(self):
        """Dense block-diagonal Pi_f."""
        return scipy.linalg.block_diag(*self.mats)

    def apply(self, Z):
        """Pi_f on an (n, l) or (n, l, k) array."""
        Z = np.asarray(Z)
        if Z.ndim == 2:
            return np.einsum("xij,xj->xi", self.mats, Z)
        return np.einsum("xij,xjk->xik", self.mats, Z)

    def restrict(self, indices):
        return OperatorFunction(self.mats[np.asarray(indices)], check=False)


def lift(v, n):
    """L: v -> E_x v (x) x."""
    v = np.asarray(v)
    return np.broadcast_to(v / n, (n,) + v.shape).copy()


def project(Z):
    """P: w (x) x -> w, summed over vertices."""
    return np.asarray(Z).sum(axis=0)


def lift_matrix(n, ell):
    return np.kron(np.ones((n, 1)) / n, np.eye(ell))


def project_matrix(n, ell):
    return np.kron(np.ones((1, n)), np.eye(ell))


def parallel_part(Z):
    """Orthogonal projection onto span{v (x) 1}."""
    Z = np.asarray(Z)
    return np.broadcast_to(Z.mean(axis=0, keepdims=True), Z.shape).copy()


def walk_operator(X):
    """Dense A_X (x) I is never formed; returns a function applying it to (n, l[, k]) arrays."""
    A = X.operator()

    def apply(Z):
        shape = Z.shape
        return (A @ Z.reshape(shape[0], -1)).reshape(shape)

    return apply


def dense_walk_operator(X, ell):
    A = X.operator().toarray()
    return np.kron(A, np.eye(ell))


def operator_bias(f, tol=1e-12, seed=0):
    """||E_x f(x)||_op."""
    return _opnorm(f.mean(), tol, seed)


def walk_product_average(f, W, budget=None):
    """Brute force E_{w in W} f(w_t) ... f(w_0) over an enumerated walk collection."""
    budget = _config.STATE_BUDGET if budget is None else budget
    if W.count * f.ell * f.ell > budget * 16:
        raise CapacityError(f"{W.count} walks of {f.ell}x{f.ell} products above budget")
    if W.base.n != f.n:
        raise DomainError("walk graph and operator function disagree on the vertex count")
    total = np.zeros((f.ell, f.ell), dtype=np.complex128)
    for block in W.blocks():
        acc = f.mats[block[:, 0]]
        for j in range(1, block.shape[1]):
            acc = np.matmul(f.mats[block[:, j]], acc)
        total += acc.sum(axis=0)
    return total / W.count


def walk_product_bias(f, W, tol=1e-12):
    return _opnorm(walk_product_average(f, W), tol)


def walk_operator_average(f, X, t):
    """P Pi_f (A_X Pi_f)^t L, evaluated on the identity of H."""
    apply_A = walk_operator(X)
    Z = lift(np.eye(f.ell, dtype=np.complex128), f.n)
    Z = f.apply(Z)
    for _ in range(t):
        Z = f.apply(apply_A(Z))
    return project(Z)


def two_step_norm_check(f, X, lambda_x=None, tol=1e-9):
    """(measured ||(A_X Pi_f)^2||, constant-bias bound, any-bias bound)."""
    from .graphs import lambda_of

    check_graph(X, undirected=True)
    if X.n != f.n:
        raise DomainError(f"graph has {X.n} vertices but f has {f.n}")
    lam_x = lambda_of(X).value if lambda_x is None else float(lambda_x)
    lam0 = operator_bias(f)
    M = dense_walk_operator(X, f.ell) @ f.bias_operator()
    measured = _opnorm(M @ M)
    bound_const = min(1.0, 2 * lam_x + lam0)
    bound_any = 1 - (1 - lam_x) ** 2 * (1 - lam0)
    if measured > min(bound_const, bound_any) + tol:
        raise AssertionError(f"two-step norm {measured} above bound {min(bound_const, bound_any)}")
    return measured, 2 * lam_x + lam0, bound_any


def random_unitary(ell, rng):
    Z = rng.standard_normal((ell, ell)) + 1j * rng.standard_normal((ell, ell))
    Q, R = np.linalg.qr(Z)
    phases = np.diag(R) / np.abs(np.diag(R))
    return Q * phases[None, :]


def random_unitaries(n, ell, seed):
    rng = np.random.default_rng(seed)
    return OperatorFunction(np.stack([random_unitary(ell, rng) for _ in range(n)]))


def standard_basis(n):
    """n x (n-1) orthonormal basis of the complement of the all-ones vector."""
    Q, _ = np.linalg.qr(np.eye(n) - 1.0 / n)
    # first n-1 columns of a QR of the centering projector span its image
    B = Q[:, : n - 1]
    return B


def _permutation_matrices(perms):
    perms = np.asarray(perms)
    k, n = perms.shape
    P = np.zeros((k, n, n))
    P[np.arange(k)[:, None], perms, np.arange(n)[None, :]] = 1.0
    return P


def build_representation(kind, S, *, a=None, seed=0, ell=2):
    """f(x) = rho(S[x]) with vertices identified with the multiset entries in order.

    kind: "defining", "standard", "sign" (symmetric groups), "character" (xor-bits,
    with character index ``a``), "random-unitary" (independent seeded unitaries).
    """
    G = S.group
    if kind == "random-unitary":
        return random_unitaries(S.size, ell, seed)
    el = S.elements
    if kind == "character":
        if G.kind != "xor-bits":
            raise DomainError("characters are provided for xor-bits groups")
        if a is None:
            raise DomainError("character needs an index a")
        parity = np.bitwise_count(np.bitwise_and(el, np.int64(a))) & 1
        return OperatorFunction((1.0 - 2.0 * parity).astype(np.complex128))
    if G.kind != "symmetric":
        raise DomainError(f"representation {kind!r} needs a symmetric group")
    if kind == "defining":
        return OperatorFunction(_permutation_matrices(el))
    if kind == "standard":
        B = standard_basis(G.n)
        P = _permutation_matrices(el)
        return OperatorFunction(np.einsum("ai,kab,bj->kij", B, P, B))
    if kind == "sign":
        return OperatorFunction(G.sign(el).astype(np.complex128))
    raise DomainError(f"unknown representation kind {kind!r}")


def kazhdan_avg(S, rho):
    """Average Kazhdan constant 2(1 - ||E rho(s)||)."""
    if rho.n != S.size:
        raise DomainError("representation does not match the multiset size")
    if not rho.is_unitary():
        raise DomainError("kazhdan_avg needs a unitary-valued representation")
    return 2 * (1 - operator_bias(rho))


def parallel_claim_check(f, trials, seed=0):
    """Max over random z = u (x) 1 of ||(Pi_f z)^par|| / (lambda_0 ||z||)."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lam0 = operator_bias(f)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(f.ell) + 1j * rng.standard_normal(f.ell)
        z = np.broadcast_to(u, (f.n, f.ell))
        num = np.linalg.norm(parallel_part(f.apply(z)))
        den = lam0 * np.linalg.norm(z)
        if den <= 1e-15:
            ratio = 0.0 if num <= 1e-12 else np.inf
        else:
            ratio = num / den
        worst = max(worst, float(ratio))
    if worst > 1 + 1e-9:
        raise AssertionError(f"parallel claim ratio {worst} > 1")
    return worst
