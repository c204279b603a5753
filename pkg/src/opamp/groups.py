"""Finite groups (xor-bits, SL2 over a prime field, symmetric groups) and generator multisets.

Elements are stored as int64 numpy arrays so that products over many entries
vectorize: a xor-bits element is a scalar int, an SL2 element a 2x2 matrix, a
permutation its 0-based image array.  ``GroupElem`` wraps a single element
together with its group for the scalar API.
"""
import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _config
from ._errors import CapacityError, DomainError

KINDS = ("xor-bits", "sl2", "symmetric")


def _is_prime(p):
    if p < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if p % q == 0:
            return p == q
    d, r = p - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in small:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(r - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


class Group:
    kind = None
    elem_shape = ()

    def __init__(self, param):
        self.param = int(param)

    def __repr__(self):
        return f"Group({self.kind!r}, {self.param})"

    def __eq__(self, other):
        return isinstance(other, Group) and (self.kind, self.param) == (other.kind, other.param)

    def __hash__(self):
        return hash((self.kind, self.param))

    @property
    def descriptor(self):
        return (self.kind, self.param)

    def header(self):
        return f"group {self.kind} {self.param}"

    def enumerable(self, cap=None):
        cap = _config.ENUMERATION_CAP if cap is None else cap
        return self.order <= cap

    def require_enumerable(self, cap=None):
        cap = _config.ENUMERATION_CAP if cap is None else cap
        if self.order > cap:
            raise CapacityError(f"{self!r} has order {self.order} above the enumeration cap {cap}")

    def as_array(self, value):
        arr = np.asarray(value, dtype=np.int64)
        if arr.shape[arr.ndim - len(self.elem_shape):] != self.elem_shape:
            raise DomainError(f"element shape {arr.shape} does not fit {self!r}")
        return arr

    def elem(self, value):
        arr = self.as_array(value)
        if arr.shape != self.elem_shape:
            raise DomainError("expected a single element")
        if not np.all(self.contains(arr)):
            raise DomainError(f"{value!r} is not an element of {self!r}")
        return GroupElem(self, _freeze(arr))

    @cached_property
    def elements(self):
        """All elements, in index order."""
        self.require_enumerable()
        arr = self._enumerate()
        arr.flags.writeable = False
        return arr

    @cached_property
    def inverse_index(self):
        """Permutation of indices sending each element to its inverse."""
        return self.index(self.inverse(self.elements))

    @cached_property
    def cyclic_subgroup(self):
        """(powers, coset_of, offset_of, reps) for a largest-order element h found by scanning.

        Every element is rep * h^offset with rep one of the left-coset representatives.
        """
        E = self.elements
        n = self.order
        ident = int(self.index(self.identity()[None])[0])
        order = np.zeros(n, dtype=np.int64)
        cur = E.copy()
        for m in range(1, 4097):
            idx = self.index(cur)
            order[(idx == ident) & (order == 0)] = m
            if np.all(order > 0):
                break
            cur = self.multiply(cur, E)
        h = int(np.argmax(order))
        k = int(order[h])
        right = self.index(self.multiply(E, E[h]))
        coset_of = np.full(n, -1, dtype=np.int64)
        offset_of = np.zeros(n, dtype=np.int64)
        reps = []
        for g in range(n):
            if coset_of[g] >= 0:
                continue
            c, x = len(reps), g
            reps.append(g)
            for m in range(k):
                coset_of[x], offset_of[x] = c, m
                x = right[x]
        powers = np.empty(k, dtype=np.int64)
        x = ident
        for m in range(k):
            powers[m] = x
            x = right[x]
        return powers, coset_of, offset_of, np.asarray(reps, dtype=np.int64)

    def multiply_many(self, arrs):
        """Left fold a*b*c... over the leading axis of a stacked array."""
        if len(arrs) == 0:
            return self.identity()
        out = arrs[0]
        for a in arrs[1:]:
            out = self.multiply(out, a)
        return out

    def left_multiplication(self, g_indices):
        """Rows k: index(g_k * h) for every h (in index order)."""
        E = self.elements
        g = E[np.asarray(g_indices)]
        return self.index(self.multiply(g[:, None], E[None, :]))


class XorBits(Group):
    """The elementary abelian group Z_2^m, elements are m-bit integers."""

    kind = "xor-bits"
    elem_shape = ()

    def __init__(self, m):
        m = int(m)
        if not 1 <= m <= 62:
            raise DomainError(f"xor-bits needs 1 <= m <= 62, got {m}")
        super().__init__(m)
        self.m = m
        self.order = 1 << m

    def identity(self):
        return np.int64(0)

    def multiply(self, a, b):
        return np.bitwise_xor(a, b)

    def inverse(self, a):
        return np.asarray(a, dtype=np.int64).copy()

    def contains(self, a):
        a = np.asarray(a)
        return (a >= 0) & (a < self.order)

    def index(self, a):
        return np.asarray(a, dtype=np.int64)

    def keys(self, a):
        return np.asarray(a, dtype=np.int64)

    def _enumerate(self):
        return np.arange(self.order, dtype=np.int64)

    def parse(self, text):
        text = text.strip()
        if len(text) != self.m or set(text) - {"0", "1"}:
            raise DomainError(f"expected a {self.m}-bit string, got {text!r}")
        return np.int64(int(text, 2))

    def format(self, a):
        return format(int(a), f"0{self.m}b")


class SL2(Group):
    """SL_2(F_p): 2x2 integer matrices mod p with determinant 1."""

    kind = "sl2"
    elem_shape = (2, 2)

    def __init__(self, p):
        p = int(p)
        if not _is_prime(p):
            raise DomainError(f"sl2 needs a prime modulus, got {p}")
        super().__init__(p)
        self.p = p
        self.order = (p * p - 1) * p

    def identity(self):
        return np.eye(2, dtype=np.int64)

    def multiply(self, a, b):
        return np.matmul(a, b) % self.p

    def inverse(self, a):
        a = np.asarray(a, dtype=np.int64)
        out = np.empty(np.broadcast_shapes(a.shape), dtype=np.int64)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 1, 1] = a[..., 0, 0]
        out[..., 0, 1] = -a[..., 0, 1]
        out[..., 1, 0] = -a[..., 1, 0]
        return out % self.p

    def contains(self, a):
        a = np.asarray(a, dtype=np.int64)
        in_range = np.all((a >= 0) & (a < self.p), axis=(-2, -1))
        det = (a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]) % self.p
        return in_range & (det == 1)

    def keys(self, a):
        a = np.asarray(a, dtype=np.int64)
        p = self.p
        return ((a[..., 0, 0] * p + a[..., 0, 1]) * p + a[..., 1, 0]) * p + a[..., 1, 1]

    @cached_property
    def _lookup(self):
        self.require_enumerable()
        table = np.full(self.p**4, -1, dtype=np.int64)
        table[self.keys(self.elements)] = np.arange(self.order)
        return table

    def index(self, a):
        return self._lookup[self.keys(a)]

    def _enumerate(self):
        p = self.p
        grid = np.stack(np.meshgrid(*[np.arange(p)] * 4, indexing="ij"), axis=-1).reshape(-1, 2, 2)
        return np.ascontiguousarray(grid[self.contains(grid)], dtype=np.int64)

    def parse(self, text):
        parts = text.split()
        if len(parts) != 4:
            raise DomainError(f"expected four integers for an sl2 element, got {text!r}")
        try:
            vals = [int(x) % self.p for x in parts]
        except ValueError:
            raise DomainError(f"bad integer in {text!r}") from None
        return np.array(vals, dtype=np.int64).reshape(2, 2)

    def format(self, a):
        return " ".join(str(int(v)) for v in np.asarray(a).reshape(-1))


class Symmetric(Group):
    """Sym_n; element arrays hold 0-based images, files use 1-based image lists."""

    kind = "symmetric"

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise DomainError(f"symmetric group needs n >= 1, got {n}")
        super().__init__(n)
        self.n = n
        self.elem_shape = (n,)
        self.order = math.factorial(n)

    def identity(self):
        return np.arange(self.n, dtype=np.int64)

    def multiply(self, a, b):
        # (a*b)(i) = a(b(i)): b acts first
        a, b = np.broadcast_arrays(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
        return np.take_along_axis(a, b, axis=-1)

    def inverse(self, a):
        return np.argsort(np.asarray(a, dtype=np.int64), axis=-1, kind="stable")

    def contains(self, a):
        a = np.asarray(a, dtype=np.int64)
        return np.all(np.sort(a, axis=-1) == np.arange(self.n), axis=-1)

    def index(self, a):
        """Lehmer rank (lexicographic index of the image sequence)."""
        a = np.asarray(a, dtype=np.int64)
        n = self.n
        if n > 20:
            raise CapacityError("Lehmer rank overflows int64 for n > 20")
        rank = np.zeros(a.shape[:-1], dtype=np.int64)
        for i in range(n):
            smaller = np.sum(a[..., i + 1:] < a[..., i:i + 1], axis=-1)
            rank += smaller * math.factorial(n - 1 - i)
        return rank

    def keys(self, a):
        a = np.ascontiguousarray(a, dtype=np.int64)
        if self.n <= 20:
            return self.index(a)
        return a.view(np.dtype((np.void, 8 * self.n))).reshape(a.shape[:-1])

    def _enumerate(self):
        return np.array(list(itertools.permutations(range(self.n))), dtype=np.int64).reshape(-1, self.n)

    def sign(self, a):
        a = np.asarray(a, dtype=np.int64)
        flat = a.reshape(-1, self.n)
        out = np.empty(len(flat), dtype=np.int64)
        for r, perm in enumerate(flat):
            seen = np.zeros(self.n, dtype=bool)
            cycles = 0
            for i in range(self.n):
                if not seen[i]:
                    cycles += 1
                    j = i
                    while not seen[j]:
                        seen[j] = True
                        j = perm[j]
            out[r] = -1 if (self.n - cycles) % 2 else 1
        return out.reshape(a.shape[:-1])

    def parse(self, text):
        try:
            vals = [int(x) - 1 for x in text.split()]
        except ValueError:
            raise DomainError(f"bad image list {text!r}") from None
        if len(vals) != self.n:
            raise DomainError(f"expected {self.n} images, got {len(vals)}")
        return np.array(vals, dtype=np.int64)

    def format(self, a):
        return " ".join(str(int(v) + 1) for v in np.asarray(a))


def make_group(kind, param):
    if kind == "xor-bits":
        return XorBits(param)
    if kind == "sl2":
        return SL2(param)
    if kind == "symmetric":
        return Symmetric(param)
    raise DomainError(f"unknown group kind {kind!r}; expected one of {KINDS}")


def _freeze(arr):
    arr = np.asarray(arr)
    if arr.ndim == 0:
        return int(arr)
    return tuple(_freeze(x) for x in arr)


@dataclass(frozen=True)
class GroupElem:
    group: Group
    value: object

    def array(self):
        return np.array(self.value, dtype=np.int64)

    def __mul__(self, other):
        return element_product([self, other])

    def inverse(self):
        return element_inverse(self)

    def __repr__(self):
        return f"GroupElem({self.group.kind}, {self.group.format(self.array())})"


def element_product(gs, group=None):
    """Left-fold product g0*g1*...; the empty product is the identity of ``group``."""
    gs = list(gs)
    if not gs:
        if group is None:
            raise DomainError("empty product needs an explicit group")
        return GroupElem(group, _freeze(group.identity()))
    G = gs[0].group if group is None else group
    for g in gs:
        if g.group != G:
            raise DomainError(f"mixed groups in product: {g.group!r} vs {G!r}")
    out = G.identity()
    for g in gs:
        out = G.multiply(out, g.array())
    return GroupElem(G, _freeze(out))


def element_inverse(g):
    return GroupElem(g.group, _freeze(g.group.inverse(g.array())))


class GeneratorMultiset:
    """Ordered multiset of group elements.

    Explicit multisets keep the ordered entries.  Products of very many walks
    are kept as exact per-element counts instead (``counts``, indexed like
    ``group.elements``); their canonical order lists the support in index order.
    """

    def __init__(self, group, elements=None, *, counts=None, symmetric=None):
        self.group = group
        if (elements is None) == (counts is None):
            raise DomainError("give exactly one of elements or counts")
        if elements is not None:
            arr = np.array(elements, dtype=np.int64)
            arr = arr.reshape((-1,) + group.elem_shape)
            if len(arr) and not np.all(group.contains(arr)):
                raise DomainError(f"an entry is not an element of {group!r}")
            arr.flags.writeable = False
            self._elements = arr
            self._counts = None
            self.size = int(len(arr))
        else:
            group.require_enumerable()
            c = np.asarray(counts)
            if c.shape != (group.order,):
                raise DomainError("counts must have one entry per group element")
            if c.dtype != object:
                c = c.astype(np.int64)
            if any(int(v) < 0 for v in c[c != 0]) if c.dtype == object else np.any(c < 0):
                raise DomainError("negative multiplicity")
            c = c.copy()
            c.flags.writeable = False
            self._elements = None
            self._counts = c
            self.size = int(sum(int(v) for v in c)) if c.dtype == object else int(c.sum())
        actual = self._is_symmetric()
        if symmetric is None:
            symmetric = actual
        elif symmetric and not actual:
            raise DomainError("symmetric flag set but the multiset is not inverse-closed")
        self.symmetric = bool(symmetric)

    def __repr__(self):
        form = "explicit" if self.is_explicit else "counted"
        return f"GeneratorMultiset({self.group!r}, size={self.size}, {form}, symmetric={self.symmetric})"

    @property
    def is_explicit(self):
        return self._elements is not None

    @property
    def elements(self):
        if self._elements is None:
            raise CapacityError("multiset is stored as counts; call materialize() first")
        return self._elements

    def __getitem__(self, i):
        return GroupElem(self.group, _freeze(self.elements[i]))

    def __iter__(self):
        for i in range(len(self.elements)):
            yield self[i]

    def histogram(self):
        """Exact multiplicity of each group element (int64, or object for huge counts)."""
        if self._counts is not None:
            return self._counts
        self.group.require_enumerable()
        return np.bincount(self.group.index(self._elements), minlength=self.group.order).astype(np.int64)

    def distribution(self):
        c = self.histogram()
        if c.dtype == object:
            total = self.size
            return np.array([float(v) / total for v in c], dtype=np.float64)
        return c.astype(np.float64) / self.size

    def support(self):
        return np.flatnonzero(self.histogram() != 0)

    def materialize(self, budget=None):
        """Explicit copy (support in index order, each element repeated by its count)."""
        if self.is_explicit:
            return self
        budget = _config.WALK_BUDGET if budget is None else budget
        if self.size > budget:
            raise CapacityError(f"multiset of size {self.size} above the explicit budget {budget}")
        c = self._counts.astype(np.int64)
        idx = np.repeat(np.arange(self.group.order), c)
        return GeneratorMultiset(self.group, self.group.elements[idx], symmetric=self.symmetric)

    def counted(self):
        if not self.is_explicit:
            return self
        return GeneratorMultiset(self.group, counts=self.histogram(), symmetric=self.symmetric)

    def same_multiset(self, other):
        if self.group != other.group or self.size != other.size:
            return False
        if self.is_explicit and other.is_explicit and not self.group.enumerable():
            a = np.sort(self.group.keys(self.elements), axis=0)
            b = np.sort(self.group.keys(other.elements), axis=0)
            return bool(np.array_equal(a, b))
        return bool(np.array_equal(np.asarray(self.histogram(), dtype=object),
                                   np.asarray(other.histogram(), dtype=object)))

    def replicate(self, r):
        r = int(r)
        if self.is_explicit:
            return GeneratorMultiset(self.group, np.tile(self._elements, (r,) + (1,) * len(self.group.elem_shape)),
                                     symmetric=self.symmetric)
        return GeneratorMultiset(self.group, counts=self._counts * r, symmetric=self.symmetric)

    def inverse_multiset(self):
        if self.is_explicit:
            return GeneratorMultiset(self.group, self.group.inverse(self._elements))
        return GeneratorMultiset(self.group, counts=self._counts[self.group.inverse_index])

    def _is_symmetric(self):
        G = self.group
        if self.size == 0:
            return True
        if self._counts is not None:
            c = self._counts
            return bool(np.array_equal(np.asarray(c, dtype=object), np.asarray(c[G.inverse_index], dtype=object)))
        a = np.sort(G.keys(self._elements), axis=0)
        b = np.sort(G.keys(G.inverse(self._elements)), axis=0)
        return bool(np.array_equal(a, b))


def inverse_pairing(S):
    """Port involution phi with S[phi(i)] = S[i]^-1; self-inverse entries are fixed points."""
    G = S.group
    el = S.elements
    keys = G.keys(el).tolist()
    inv_keys = G.keys(G.inverse(el)).tolist()
    buckets = {}
    for i, k in enumerate(keys):
        buckets.setdefault(k, []).append(i)
    phi = np.arange(len(keys), dtype=np.int64)
    for k, mine in buckets.items():
        kinv = inv_keys[mine[0]]
        if kinv == k or k > kinv:
            continue
        theirs = buckets.get(kinv)
        if theirs is None or len(theirs) != len(mine):
            raise DomainError("multiset is not inverse-closed")
        phi[mine] = theirs
        phi[theirs] = mine
    return phi


def cayley_graph(S, cap=None):
    """Cay(G, S): vertex h has port i to S[i]*h; undirected iff S is symmetric."""
    from .graphs import RotationGraph

    S.group.require_enumerable(cap)
    S = S.materialize()
    G = S.group
    n, d = G.order, S.size
    if d == 0:
        raise DomainError("empty generator multiset")
    if n * d > _config.PORT_CAP:
        raise CapacityError(f"Cayley graph with {n}*{d} ports above the port cap")
    el = S.elements
    if G.kind == "xor-bits":
        nbr = np.bitwise_xor(np.arange(n, dtype=np.int64)[:, None], el[None, :])
    else:
        E = G.elements
        nbr = np.empty((n, d), dtype=np.int64)
        step = max(1, 2**22 // max(d, 1))
        for lo in range(0, n, step):
            block = G.multiply(el[None, :], E[lo:lo + step, None])
            nbr[lo:lo + step] = G.index(block)
    if S.symmetric:
        phi = inverse_pairing(S)
        port = np.broadcast_to(phi, (n, d)).copy()
        return RotationGraph(nbr, port)
    return RotationGraph(nbr, None, directed=True)


def pad_with_identity(S, count):
    count = int(count)
    if count < 0:
        raise DomainError("count must be >= 0")
    if count == 0:
        return S
    G = S.group
    if S.is_explicit:
        ident = np.broadcast_to(G.identity(), (count,) + G.elem_shape)
        return GeneratorMultiset(G, np.concatenate([S.elements, ident]), symmetric=S.symmetric)
    c = S.histogram()
    c = c.astype(object) if c.dtype == object else c.copy()
    c[int(G.index(G.identity()))] += count
    return GeneratorMultiset(G, counts=c, symmetric=S.symmetric)


def walsh_hadamard(values):
    """Unnormalized Walsh-Hadamard transform along the last axis (length 2^m)."""
    a = np.array(values, copy=True)
    n = a.shape[-1]
    h = 1
    while h < n:
        a = a.reshape(a.shape[:-1] + (n // (2 * h), 2, h))
        x = a[..., 0, :].copy()
        y = a[..., 1, :]
        a[..., 0, :] = x + y
        a[..., 1, :] = x - y
        a = a.reshape(a.shape[:-3] + (n,))
        h *= 2
    return a


def bias_exact(S, tol=1e-9, *, dense_cap=None, seed=0):
    """bias(S) = lambda(Cay(G, S)), via the spectrum of the Cayley operator."""
    return bias_report(S, tol, dense_cap=dense_cap, seed=seed).value


@dataclass(frozen=True)
class BiasReport:
    value: float
    method: str
    residual: float = 0.0


def bias_report(S, tol=1e-9, *, dense_cap=None, seed=0):
    from . import spectral

    if tol <= 0:
        raise DomainError("tol must be > 0")
    G = S.group
    G.require_enumerable()
    if S.size == 0:
        raise DomainError("empty generator multiset")
    w = S.distribution()
    if G.kind == "xor-bits":
        # characters diagonalize every Cayley operator of Z_2^m
        spec = walsh_hadamard(w)
        return BiasReport(float(np.max(np.abs(spec[1:]), initial=0.0)), "characters")
    cap = _config.dense_cap(dense_cap)
    support = np.flatnonzero(w)
    n = G.order
    if n <= cap:
        A = cayley_operator_dense(G, w)
        return BiasReport(spectral.deflated_dense(A, symmetric=S.symmetric), "dense")
    blocks = coset_fourier_blocks(G, w, cap)
    if blocks is not None:
        return BiasReport(_blocks_bias(blocks, S.symmetric), "coset-fourier")
    if len(support) * n <= _config.STATE_BUDGET:
        perms = G.left_multiplication(support)
        weights = w[support]

        def apply(X):
            Y = np.zeros_like(X)
            for k in range(len(support)):
                Y[perms[k]] += weights[k] * X
            return Y

        def apply_t(X):
            Y = np.zeros_like(X)
            for k in range(len(support)):
                Y += weights[k] * X[perms[k]]
            return Y
    elif n * n <= 4 * _config.STATE_BUDGET:
        A = cayley_operator_dense(G, w)
        apply = A.__matmul__
        apply_t = A.T.__matmul__
    else:
        raise CapacityError(f"bias of a {n}-element group with support {len(support)} above budget")
    rep = spectral.deflated_power(apply, apply_t, n, symmetric=S.symmetric, tol=tol, seed=seed)
    return BiasReport(rep.value, "power-iteration", rep.residual)


def coset_fourier_blocks(G, w, cap=None):
    """Block-diagonalize the weighted Cayley operator along a cyclic subgroup H = <h>.

    Left convolution commutes with right translation by h, so the operator splits
    into |H| blocks of size |G/H|, one per character of H.  Returns the (|H|, r, r)
    complex stack, or None when a block would exceed ``cap`` or the products the
    budget.
    """
    cap = _config.dense_cap(cap)
    powers, coset_of, offset_of, reps = G.cyclic_subgroup
    k, r = len(powers), len(reps)
    support = np.flatnonzero(w)
    if r > cap or len(support) * r > 4 * _config.STATE_BUDGET:
        return None
    E = G.elements
    inv = G.inverse(E[support])
    # C[c, a, b] = total weight of s with s^-1 g_a = g_b h^c
    C = np.zeros(k * r * r)
    step = max(1, _config.STATE_BUDGET // (4 * r))
    for lo in range(0, len(support), step):
        sl = slice(lo, lo + step)
        prod = G.index(G.multiply(inv[sl][:, None], E[reps][None, :]))
        a = np.broadcast_to(np.arange(r)[None, :], prod.shape)
        flat = (offset_of[prod] * r + a) * r + coset_of[prod]
        wts = np.broadcast_to(w[support[sl]][:, None], prod.shape)
        C += np.bincount(flat.ravel(), weights=wts.ravel(), minlength=k * r * r)
    return np.fft.fft(C.reshape(k, r, r), axis=0)


def _blocks_bias(blocks, symmetric):
    from . import spectral

    best = spectral.deflated_dense(blocks[0].real, symmetric=symmetric)
    for B in blocks[1:]:
        if symmetric:
            val = float(np.max(np.abs(np.linalg.eigvalsh((B + B.conj().T) / 2))))
        else:
            val = float(np.linalg.svd(B, compute_uv=False)[0])
        best = max(best, val)
    return min(best, 1.0) if best < 1 + 1e-12 else best


def cayley_operator_dense(G, w):
    """Dense normalized adjacency A[k, h] = w(k h^-1) of the weighted Cayley graph."""
    n = G.order
    A = np.zeros((n, n))
    support = np.flatnonzero(w)
    step = max(1, 2**22 // n)
    cols = np.arange(n)
    for lo in range(0, len(support), step):
        chunk = support[lo:lo + step]
        rows = G.left_multiplication(chunk)
        for k, g in enumerate(chunk):
            A[rows[k], cols] += w[g]
    return A
