"""The s-wide replacement product and its derandomized walks.

Vertices are pairs (x, y) with x in V_X and y in V_Y = Z_2^(s*b), b = log2(d1);
block i of y is the b-bit field (y >> i*b) & (d1 - 1).  One walk step with
inner label j first moves y along Y (y <- inner[j, y]) and then applies the
rotation with index k mod s at step k:

    a = block_i(y),  x <- x[a],  block_i(y) <- phi(a)
"""
import math

import numpy as np

from . import _config
from ._errors import CapacityError, DomainError
from ._validation import check_graph, check_multiset, check_natural
from .graphs import LocalInversion, check_local_inversion
from .groups import GeneratorMultiset, XorBits, walsh_hadamard

BLOCK = 1 << 15


def _phi_from_ports(X):
    port = X.port
    if np.all(port == port[:1]):
        return port[0].copy()
    raise DomainError("X has no vertex-independent port inversion; pass phi explicitly")


class SWideProduct:
    """(X, phi, Y, s): outer graph X, its local inversion phi, inner graph Y on [d1]^s.

    ``Y`` is a generator multiset T on Z_2^(s*b) (the supported configuration);
    ``inner`` may instead give an arbitrary (d2, |V_Y|) step table, used only by
    the compatibility oracle's exploratory mode.
    """

    def __init__(self, X, s, Y=None, *, phi=None, inner=None):
        check_graph(X, undirected=True)
        self.X = X
        self.s = check_natural(s, "s", 1)
        d1 = X.d
        if d1 < 2 or d1 & (d1 - 1):
            raise DomainError(f"d1 = {d1} must be a power of two >= 2")
        self.d1 = d1
        self.b = d1.bit_length() - 1
        self.nY = 1 << (self.s * self.b)
        if self.nY > _config.STATE_BUDGET:
            raise CapacityError(f"|V_Y| = {self.nY} above budget")
        phi = _phi_from_ports(X) if phi is None else phi
        self.phi = LocalInversion(phi).phi
        if not np.array_equal(self.phi[self.phi], np.arange(d1)):
            raise DomainError("phi must be an involution")
        if not check_local_inversion(X, self.phi):
            raise DomainError("phi is not a local inversion of X")
        if (Y is None) == (inner is None):
            raise DomainError("give exactly one of Y (generator multiset) or inner (step table)")
        if Y is not None:
            check_multiset(Y)
            if Y.group != XorBits(self.s * self.b):
                raise DomainError(f"Y must be generated in Z_2^{self.s * self.b}")
            self.T = np.asarray(Y.elements, dtype=np.int64)
            self.Y = Y
            self.d2 = len(self.T)
            self._inner = None
        else:
            inner = np.asarray(inner, dtype=np.int64)
            if inner.ndim != 2 or inner.shape[1] != self.nY:
                raise DomainError("inner table must have shape (d2, |V_Y|)")
            for row in inner:
                if not np.array_equal(np.sort(row), np.arange(self.nY)):
                    raise DomainError("each inner step must be a bijection of V_Y")
            self.T = None
            self.Y = None
            self.d2 = inner.shape[0]
            self._inner = inner

    def __repr__(self):
        return (f"SWideProduct(nX={self.X.n}, d1={self.d1}, s={self.s}, d2={self.d2}, "
                f"cayley={self.is_cayley})")

    @property
    def is_cayley(self):
        return self.T is not None

    @property
    def inner(self):
        if self._inner is None:
            y = np.arange(self.nY, dtype=np.int64)
            self._inner = np.bitwise_xor(self.T[:, None], y[None, :])
        return self._inner

    def walk_count(self, t):
        return self.X.n * self.nY * self.d2**t

    def block(self, y, i):
        return (np.asarray(y) >> (i * self.b)) & (self.d1 - 1)

    def rotate(self, x, y, i):
        """Rot_i on arrays (or scalars) of vertex pairs."""
        i = int(i)
        if not 0 <= i < self.s:
            raise DomainError(f"rotation index {i} outside [0, {self.s})")
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        a = self.block(y, i)
        x2 = self.X.nbr[x, a]
        shift = i * self.b
        y2 = (y & ~np.int64((self.d1 - 1) << shift)) | (self.phi[a] << shift)
        return x2, y2

    def step(self, x, y, j, k):
        """Inner move with label j, then the rotation of step k."""
        y = self.inner[np.asarray(j), np.asarray(y)]
        return self.rotate(x, y, k % self.s)


def swide_rotate(P, x, y, i):
    x2, y2 = P.rotate(x, y, i)
    return int(x2), int(y2)


class SWideWalks:
    """All walks (x0, y0, J) of t steps in canonical order: x0, then y0, then J big-endian."""

    def __init__(self, P, t):
        self.P = P
        self.t = check_natural(t, "t", 1)
        self.count = P.walk_count(self.t)

    def __len__(self):
        return self.count

    def decode(self, index):
        """X-trajectories (m, t+1) and final y for canonical walk indices."""
        P, t = self.P, self.t
        index = np.asarray(index, dtype=np.int64)
        span_j = P.d2**t
        start = index // span_j
        rest = index % span_j
        x = start // P.nY
        y = start % P.nY
        traj = np.empty((len(index), t + 1), dtype=np.int64)
        traj[:, 0] = x
        span = span_j
        for k in range(t):
            span //= P.d2
            j = rest // span
            rest = rest % span
            x, y = P.step(x, y, j, k)
            traj[:, k + 1] = x
        return traj, y

    def blocks(self, size=BLOCK):
        if self.count >= 2**62:
            raise CapacityError("s-wide walk collection too large to stream")
        for lo in range(0, self.count, size):
            yield self.decode(np.arange(lo, min(self.count, lo + size)))[0]

    def __iter__(self):
        for block in self.blocks():
            yield from (tuple(int(v) for v in row) for row in block)


def enumerate_swide_walks(P, t):
    return SWideWalks(P, t)


_PRIMES = []


def _residue_primes(count):
    """The ``count`` largest primes below 2^31 (products of two residues fit in int64)."""
    import sympy

    while len(_PRIMES) < count:
        _PRIMES.append(int(sympy.prevprime(_PRIMES[-1] if _PRIMES else 2**31)))
    return _PRIMES[:count]


def _crt(residues, primes):
    """Chinese remaindering of per-prime histograms into exact integers."""
    M = 1
    for p in primes:
        M *= p
    out = [0] * len(residues[0])
    for r, p in zip(residues, primes):
        Mi = M // p
        coef = Mi * pow(Mi, -1, p)
        for i, v in enumerate(r):
            if v:
                out[i] += int(v) * coef
    vals = [v % M for v in out]
    if max(vals, default=0) < 2**62:
        return np.array(vals, dtype=np.int64)
    return np.array(vals, dtype=object)


class SWideCountDP:
    """Exact counts over states (x, y, g) of walks whose product S[x_k]...S[x_0] is g.

    Counts live in int64 while they fit and otherwise as residues modulo primes
    below 2^31, recombined only for the final histogram; ``steps`` bounds how many
    steps the residues must stay exact for.  With ``track_distribution`` a float
    copy of the normalized state rides along for cheap bias estimates.
    """

    def __init__(self, S, P, steps=None, *, track_distribution=False, exact=True):
        G = S.group
        G.require_enumerable()
        if P.X.n * P.nY * G.order > _config.STATE_BUDGET:
            raise CapacityError("s-wide walk state space above budget")
        if not exact and not track_distribution:
            raise DomainError("nothing to track: set exact or track_distribution")
        S = S.materialize()
        self.G, self.P = G, P
        idx = G.index(S.elements)
        self.left = G.left_multiplication(idx)  # (nX, |G|)
        self.total = P.X.n * P.nY
        self.k = 0
        self.steps = steps
        base = np.zeros((P.X.n, P.nY, G.order), dtype=np.int64)
        base[np.arange(P.X.n), :, idx] = 1
        self.layers = []
        if exact:
            if steps is None:
                self.layers.append(["int", 0, base])
            else:
                bits = math.log2(self.total) + steps * math.log2(P.d2) + math.log2(P.nY) + 1
                if bits < 62:
                    self.layers.append(["int", 0, base])
                else:
                    for q in _residue_primes(math.ceil((bits + 1) / 30)):
                        self.layers.append(["mod", q, base.copy()])
        if track_distribution:
            self.layers.append(["float", 0, base.astype(np.float64) / self.total])
        if P.is_cayley:
            self.t_counts = np.bincount(P.T, minlength=P.nY)
            self._t_spec = walsh_hadamard(self.t_counts.astype(np.int64))
        xs = np.repeat(np.arange(P.X.n), P.nY)
        ys = np.tile(np.arange(P.nY), P.X.n)
        self._pairs = (xs, ys)

    @property
    def exact(self):
        return any(kind != "float" for kind, _, _ in self.layers)

    def _inner_move(self, kind, q, st):
        P = self.P
        if not P.is_cayley:
            moved = np.zeros_like(st)
            for row in P.inner:
                np.add.at(moved, (slice(None), row), st)
            if kind == "float":
                moved /= P.d2
            elif kind == "mod":
                moved %= q
            return moved
        # y-marginal update is an xor-convolution with the counts of T
        spec = walsh_hadamard(np.moveaxis(st, 1, -1))
        if kind == "float":
            moved = walsh_hadamard(spec * (self._t_spec / P.d2)) / P.nY
        elif kind == "int":
            moved = walsh_hadamard(spec * self._t_spec) // P.nY
        else:
            spec %= q
            spec = (spec * (self._t_spec % q)) % q
            moved = walsh_hadamard(spec) % q
            moved = (moved * pow(P.nY, -1, q)) % q
        return np.moveaxis(moved, -1, 1)

    def step(self):
        P = self.P
        if self.steps is not None and self.k >= self.steps and any(k == "mod" for k, _, _ in self.layers):
            raise CapacityError(f"residue precision was sized for {self.steps} steps")
        self.total *= P.d2
        for layer in self.layers:
            if layer[0] == "int" and self.total * P.nY >= 2**62:
                raise CapacityError("int64 walk counts would overflow; pass steps to size residues")
        xs, ys = self._pairs
        x2, y2 = P.rotate(xs, ys, self.k % P.s)
        cols = self.left[x2]  # (nX*nY, |G|)
        target = x2 * P.nY + y2
        for layer in self.layers:
            kind, q, st = layer
            moved = self._inner_move(kind, q, st)
            # rotation is a bijection on (x, y); then left-multiply by S[x2]
            rows = moved[xs, ys]
            out = np.empty_like(rows)
            np.put_along_axis(out, cols, rows, axis=1)
            new = np.empty_like(moved).reshape(-1, moved.shape[2])
            new[target] = out
            layer[2] = new.reshape(moved.shape)
        self.k += 1

    def histogram(self):
        ints = [st for kind, _, st in self.layers if kind == "int"]
        if ints:
            return ints[0].sum(axis=(0, 1))
        mods = [(q, st) for kind, q, st in self.layers if kind == "mod"]
        if not mods:
            raise DomainError("no exact layer tracked")
        residues = [(st.sum(axis=(0, 1)) % q).tolist() for q, st in mods]
        return _crt(residues, [q for q, _ in mods])

    def distribution(self):
        for kind, _, st in self.layers:
            if kind == "float":
                return st.sum(axis=(0, 1))
        h = self.histogram()
        return np.array([float(v) for v in h]) / float(self.total) if h.dtype == object else h / self.total


def derandomized_product(S, P, t, *, form="auto"):
    """One newest-first product S[x_t] ... S[x_0] per s-wide walk."""
    check_multiset(S)
    t = check_natural(t, "t", 1)
    if P.X.n != S.size:
        raise DomainError(f"|V_X| = {P.X.n} but |S| = {S.size}")
    count = P.walk_count(t)
    if form == "auto":
        form = "explicit" if S.is_explicit and count <= _config.WALK_BUDGET else "counted"
    if form == "explicit":
        if count > _config.WALK_BUDGET:
            raise CapacityError(f"{count} s-wide walks above the explicit budget")
        G, el = S.group, S.elements
        parts = []
        for traj in SWideWalks(P, t).blocks():
            acc = el[traj[:, 0]]
            for k in range(1, t + 1):
                acc = G.multiply(el[traj[:, k]], acc)
            parts.append(acc)
        return GeneratorMultiset(G, np.concatenate(parts))
    dp = SWideCountDP(S, P, t)
    for _ in range(t):
        dp.step()
    return GeneratorMultiset(S.group, counts=dp.histogram())


def swide_bias_bound(lambda_y, s, t):
    """(lY^s + s lY^(s-1) + s^2 lY^(s-3))^floor(t/s), clamped to [0, 1]."""
    s = check_natural(s, "s", 1)
    t = check_natural(t, "t", 0)
    lam = float(lambda_y)
    if not 0 <= lam <= 1:
        raise DomainError("lambda_y must lie in [0, 1]")
    e = t // s
    if e == 0:
        return 1.0
    if s < 3 and lam == 0:
        return 1.0
    base = lam**s + s * lam ** (s - 1) + s * s * lam ** (s - 3)
    if base >= 1:
        return 1.0
    return float(max(0.0, base**e))


def swide_precondition_margin(lambda0, lambda_x, lambda_y):
    """lambda_Y^2 - 2 lambda_X - lambda_0; the bound applies when this is >= 0."""
    return lambda_y**2 - 2 * lambda_x - lambda0


def _walk_distribution(X, x0, steps):
    p = np.zeros(X.n)
    p[x0] = 1.0
    A = X.operator()
    for _ in range(steps):
        p = A @ p
    return p


def compatibility_check(P, a, b, J, x0):
    """TV distance between the X-endpoint of B[a, b, J] from (x0, uniform y0) and A_X^(b-a+1) e_x0."""
    a, b = int(a), int(b)
    if not 0 <= a <= b <= P.s - 1:
        raise DomainError("need 0 <= a <= b <= s-1")
    J = list(J)
    if len(J) != b - a + 1:
        raise DomainError("J must have one inner label per step")
    y = np.arange(P.nY, dtype=np.int64)
    x = np.full(P.nY, int(x0), dtype=np.int64)
    for k, j in zip(range(a, b + 1), J):
        x, y = P.step(x, y, np.full(P.nY, int(j)), k)
    counts = np.bincount(x, minlength=P.X.n)
    got = counts / P.nY
    want = _walk_distribution(P.X, int(x0), b - a + 1)
    return 0.5 * float(np.abs(got - want).sum())


def rotation_operator(P, i, ell):
    """Permutation matrix of Rot_i on H (x) C[V_X] (x) C[V_Y]; index (x*nY + y)*ell + h."""
    nX, nY = P.X.n, P.nY
    xs = np.repeat(np.arange(nX), nY)
    ys = np.tile(np.arange(nY), nX)
    x2, y2 = P.rotate(xs, ys, i)
    perm = x2 * nY + y2
    return perm


def simulation_check(P, f, s1, s2, trials=4, seed=0):
    """Max |<prod_i (X_i A_Y Pi_f)(z (x) u_Y), z' (x) 1> - <(A_X Pi_f)^(s2-s1+1) z, z'>| over random z, z'.

    u_Y is the uniform distribution on V_Y; the product applies i = s1 first.
    """
    from .operators import walk_operator

    s1, s2 = int(s1), int(s2)
    if not 0 <= s1 <= s2 < P.s:
        raise DomainError("need 0 <= s1 <= s2 < s")
    if f.n != P.X.n:
        raise DomainError("operator function does not match |V_X|")
    nX, nY, ell = P.X.n, P.nY, f.ell
    if nX * nY * ell * max(trials, 1) > _config.STATE_BUDGET:
        raise CapacityError("simulation state above budget")
    rng = np.random.default_rng(seed)
    apply_A = walk_operator(P.X)
    inner = P.inner
    perms = {i: rotation_operator(P, i, ell) for i in range(s1, s2 + 1)}
    worst = 0.0
    for _ in range(trials):
        z = rng.standard_normal((nX, ell)) + 1j * rng.standard_normal((nX, ell))
        z2 = rng.standard_normal((nX, ell)) + 1j * rng.standard_normal((nX, ell))
        V = np.broadcast_to(z[:, None, :] / nY, (nX, nY, ell)).copy()
        for i in range(s1, s2 + 1):
            V = np.einsum("xij,xyj->xyi", f.mats, V)
            moved = np.zeros_like(V)
            for row in inner:
                moved[:, row] += V
            V = moved / P.d2
            flat = V.reshape(nX * nY, ell)
            out = np.empty_like(flat)
            out[perms[i]] = flat
            V = out.reshape(nX, nY, ell)
        lhs = np.vdot(np.broadcast_to(z2[:, None, :], V.shape), V)
        W = z.astype(np.complex128)
        for _ in range(s2 - s1 + 1):
            W = apply_A(f.apply(W))
        rhs = np.vdot(z2, W)
        worst = max(worst, abs(lhs - rhs))
    if worst > 1e-9:
        raise AssertionError(f"simulation deviation {worst}")
    return worst


def swide_log2_size(P, t):
    return math.log2(P.X.n) + P.s * P.b + t * math.log2(P.d2)


def swide_operator_average(f, P, t):
    """E over all s-wide walks of f(x_t) ... f(x_0), by dynamic programming over (x, y)."""
    if f.n != P.X.n:
        raise DomainError("operator function does not match |V_X|")
    nX, nY, ell = P.X.n, P.nY, f.ell
    if nX * nY * ell * ell > _config.STATE_BUDGET:
        raise CapacityError("operator walk state above budget")
    M = np.broadcast_to(f.mats[:, None], (nX, nY, ell, ell)) / (nX * nY)
    xs = np.repeat(np.arange(nX), nY)
    ys = np.tile(np.arange(nY), nX)
    for k in range(t):
        moved = np.zeros((nX, nY, ell, ell), dtype=np.complex128)
        for row in P.inner:
            moved[:, row] += M
        moved /= P.d2
        x2, y2 = P.rotate(xs, ys, k % P.s)
        flat = np.empty((nX * nY, ell, ell), dtype=np.complex128)
        flat[x2 * nY + y2] = moved.reshape(nX * nY, ell, ell)
        flat = np.matmul(f.mats[np.repeat(np.arange(nX), nY)], flat)
        M = flat.reshape(nX, nY, ell, ell)
    return M.sum(axis=(0, 1))
