"""Explicit auxiliary expanders: AGHP small-bias Cayley graphs, SL2(p) generators, providers."""
import math
from dataclasses import dataclass, field

import numpy as np
import sympy

from . import _config
from ._errors import CapacityError, DomainError, ProviderError
from ._validation import check_natural, check_unit_interval
from .graphs import RotationGraph, complete_graph_with_loops
from .groups import SL2, GeneratorMultiset, XorBits, cayley_graph, walsh_hadamard

# lowest-weight irreducible polynomial of each degree over F_2 (bit i = coefficient of x^i)
IRREDUCIBLE = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11B,
    9: 0x203, 10: 0x409, 11: 0x805, 12: 0x1009, 13: 0x201B, 14: 0x4021,
    15: 0x8003, 16: 0x1002B, 17: 0x20009, 18: 0x40009, 19: 0x80027,
    20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021, 24: 0x100001B,
    25: 0x2000009, 26: 0x400001B, 27: 0x8000027, 28: 0x10000003,
    29: 0x20000005, 30: 0x40000003, 31: 0x80000009, 32: 0x10000008D,
}


class GF2k:
    """F_{2^k} as k-bit integers: carry-less product reduced by a fixed irreducible."""

    def __init__(self, k):
        if k not in IRREDUCIBLE:
            raise DomainError(f"field degree must be in 1..32, got {k}")
        self.k = k
        self.poly = IRREDUCIBLE[k]
        self.size = 1 << k

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        k = self.k
        acc = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.uint64)
        one = np.uint64(1)
        for i in range(k):
            acc ^= (a << np.uint64(i)) * ((b >> np.uint64(i)) & one)
        for bit in range(2 * k - 2, k - 1, -1):
            hit = (acc >> np.uint64(bit)) & one
            acc ^= hit * np.uint64(self.poly << (bit - k))
        return acc

    def pow(self, a, e):
        out = np.ones_like(np.asarray(a, dtype=np.uint64))
        for _ in range(e):
            out = self.mul(out, a)
        return out


def _parity(x):
    return (np.bitwise_count(x) & 1).astype(np.int64)


@dataclass(frozen=True)
class AghpSet:
    m: int
    k: int
    elements: np.ndarray

    @property
    def d(self):
        return len(self.elements)

    @property
    def bound(self):
        return self.m / math.sqrt(self.d)

    @property
    def multiset(self):
        return GeneratorMultiset(XorBits(self.m), self.elements, symmetric=True)

    def bias(self):
        """Exhaustive character bias max_{a != 0} |E (-1)^<a, s>|."""
        if self.m > 26:
            raise CapacityError("exhaustive character check limited to m <= 26")
        w = np.bincount(self.elements, minlength=1 << self.m).astype(np.float64) / self.d
        return float(np.max(np.abs(walsh_hadamard(w)[1:]), initial=0.0))


def aghp_set(m, k):
    """Element (x, y) has bit i equal to <x^i, y> over F_2, for i < m."""
    m = check_natural(m, "m", 1)
    k = check_natural(k, "k", 1)
    if 2 * k > m:
        raise DomainError(f"need d = 2^(2k) <= 2^m, got m={m}, k={k}")
    if m > 62:
        raise DomainError("m must be <= 62")
    if 2 * k > 26:
        raise CapacityError("AGHP sets limited to d <= 2^26 entries")
    F = GF2k(k)
    xs = np.arange(F.size, dtype=np.uint64)
    ys = xs
    power = np.ones(F.size, dtype=np.uint64)
    out = np.zeros((F.size, F.size), dtype=np.int64)
    for i in range(m):
        bits = _parity(power[:, None] & ys[None, :])
        out |= bits << i
        power = F.mul(power, xs)
    return AghpSet(m, k, out.reshape(-1))


def aghp_cayley_graph(m, k):
    A = aghp_set(m, k)
    return A, cayley_graph(A.multiset)


def find_prime_in_range(n):
    """Smallest prime >= n, with the prime-gap check appropriate to the size of n."""
    n = check_natural(n, "n", 2)
    p = int(sympy.nextprime(n - 1))
    if n >= 2 ** (3 * 2**15):
        ok = (p - n) ** 3 <= 64 * n * n
    else:
        ok = p <= 2 * n
    if not ok:
        raise AssertionError(f"prime {p} outside the guaranteed interval for n={n}")
    return p


def sl2_generators(p):
    p = int(p)
    if p <= 17:
        raise DomainError(f"sl2 generators need p > 17, got {p}")
    G = SL2(p)
    gens = [[[1, 1], [0, 1]], [[1, p - 1], [0, 1]], [[1, 0], [1, 1]], [[1, 0], [p - 1, 1]]]
    return GeneratorMultiset(G, gens, symmetric=True)


def _ceil_cbrt(n):
    c = int(round(n ** (1 / 3)))
    while c**3 < n:
        c += 1
    while c > 1 and (c - 1) ** 3 >= n:
        c -= 1
    return c


def sl2_prime_for(n):
    """Prime p >= ceil(n^(1/3)) + 1, bumped above 17 for the generator set."""
    p = find_prime_in_range(_ceil_cbrt(n) + 1)
    return max(p, 19)


def small_cayley_expander(n, lam, *, provider=None, beta=1.0, graph=True):
    """Cayley graph of SL2(p) on n' = (p^2-1)p >= n vertices with bias <= lam."""
    from .walks import exp_walk_pipeline

    n = check_natural(n, "n", 1)
    lam = check_unit_interval(lam, "lambda")
    p = sl2_prime_for(n)
    S0 = sl2_generators(p)
    S, _ = exp_walk_pipeline(S0, lam, beta, provider)
    n_prime = S0.group.order
    X = None
    if graph:
        if S.size * n_prime > _config.PORT_CAP:
            raise CapacityError(f"Cayley graph of degree {S.size} on {n_prime} vertices above the port cap")
        X = cayley_graph(S.materialize())
    return X, S, n_prime


@dataclass
class AuxiliaryExpander:
    """Provider result: graph on replication*n + pad vertices with lambda(graph) <= lam."""

    graph: RotationGraph
    replication: int
    pad: int
    lam: float
    strategy: str
    detail: dict = field(default_factory=dict)

    @property
    def theta(self):
        base = self.graph.n - self.pad
        return self.pad / base if base else 0.0

    def prepare(self, S):
        """Replicate S and pad with identities so entries match the graph's vertices."""
        from .groups import pad_with_identity

        out = pad_with_identity(S.replicate(self.replication), self.pad)
        if out.size != self.graph.n:
            raise DomainError("prepared multiset does not match the auxiliary graph")
        return out


def _aghp_for(n, lam, theta_max, certify, max_degree):
    if n & (n - 1) == 0:
        m0 = n.bit_length() - 1
        m0 = max(m0, 2)
    else:
        r_min = math.ceil(1 / theta_max)
        m0 = (r_min * n - 1).bit_length()
    for mp in range(m0, m0 + 8):
        if mp > 26:
            break
        r = (1 << mp) // n
        pad = (1 << mp) - r * n
        for k in range(1, mp // 2 + 1):
            d = 1 << (2 * k)
            if max_degree is not None and d > max_degree:
                break
            if certify == "bound":
                if mp / math.sqrt(d) > lam:
                    continue
                if (1 << mp) * d > _config.PORT_CAP:
                    raise ProviderError(f"AGHP graph m'={mp}, k={k} above the port cap")
                A = aghp_set(mp, k)
                measured = A.bias() if mp <= 20 else A.bound
                return A, r, pad, measured
            if (1 << mp) * d > _config.PORT_CAP:
                break
            A = aghp_set(mp, k)
            measured = A.bias()
            if measured <= lam:
                return A, r, pad, measured
        if certify == "bound":
            continue
    return None


def auxiliary_expander(n, lam, strategy="aghp-pad", *, theta_max=0.01, certify="bound", max_degree=None):
    """Expander on (a replication of) n vertices with certified lambda <= lam."""
    n = check_natural(n, "n", 1)
    lam = check_unit_interval(lam, "lambda", open_left=False, open_right=False)
    if strategy == "complete":
        return AuxiliaryExpander(complete_graph_with_loops(n), 1, 0, 0.0, "complete")
    if strategy == "aghp-pad":
        found = _aghp_for(n, lam, theta_max, certify, max_degree)
        if found is None:
            raise ProviderError(f"no AGHP parameters reach lambda {lam} for n={n}")
        A, r, pad, measured = found
        g = cayley_graph(A.multiset)
        return AuxiliaryExpander(g, r, pad, measured, "aghp-pad",
                                 {"m": A.m, "k": A.k, "d": A.d, "bound": A.bound})
    if strategy == "sl2":
        g, S, n_prime = small_cayley_expander(n, lam)
        return AuxiliaryExpander(g, 1, n_prime - n, float(_measured(S)), "sl2", {"p": S.group.param})
    raise DomainError(f"unknown provider strategy {strategy!r}")


def _measured(S):
    from .groups import bias_exact

    return bias_exact(S)


class ExpanderProvider:
    """Callable provider: (n, lam) -> AuxiliaryExpander.

    ``strategy="auto"`` takes the smallest-degree candidate among the complete
    graph with loops (lambda 0, degree n) and a measured AGHP graph.
    """

    def __init__(self, strategy="auto", theta_max=0.01, certify="measured", max_degree=None):
        self.strategy = strategy
        self.theta_max = theta_max
        self.certify = certify
        self.max_degree = max_degree

    def __repr__(self):
        return f"ExpanderProvider(strategy={self.strategy!r}, certify={self.certify!r})"

    def __call__(self, n, lam):
        if self.strategy != "auto":
            return auxiliary_expander(n, lam, self.strategy, theta_max=self.theta_max,
                                      certify=self.certify, max_degree=self.max_degree)
        candidates = []
        if self.max_degree is None or n <= self.max_degree:
            candidates.append(auxiliary_expander(n, lam, "complete"))
        cap = n if self.max_degree is None else min(n - 1, self.max_degree)
        if cap >= 4:
            try:
                candidates.append(auxiliary_expander(n, lam, "aghp-pad", theta_max=self.theta_max,
                                                     certify="measured", max_degree=cap))
            except (ProviderError, CapacityError):
                pass
        if not candidates:
            raise ProviderError(f"no auxiliary expander for n={n}, lambda={lam}")
        return min(candidates, key=lambda a: (a.graph.d, a.lam))
