"""Regular multigraphs given by rotation maps, plus their spectral and metric checks."""
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import _config
from ._errors import CapacityError, DomainError, IrregularGraphError
from .spectral import SpectralReport, deflated_dense, deflated_power


class RotationGraph:
    """d-regular multigraph on [n]; port i of vertex v leads to nbr[v, i].

    For undirected graphs ``port[v, i]`` is the port of the far endpoint, so
    rot(v, i) = (nbr[v, i], port[v, i]) is an involution on ports.
    Directed graphs carry no return ports.
    """

    def __init__(self, nbr, port=None, directed=False, *, complete=False, validate=True):
        nbr = np.asarray(nbr, dtype=np.int64)
        if nbr.ndim != 2:
            raise DomainError("nbr must be an (n, d) array")
        n, d = nbr.shape
        if n == 0 or d == 0:
            raise DomainError("graph needs n >= 1 and d >= 1")
        if directed:
            port = None
        elif port is None:
            raise DomainError("undirected graph needs return ports")
        else:
            port = np.asarray(port, dtype=np.int64)
            if port.shape != nbr.shape:
                raise DomainError("port table shape differs from nbr")
        self.nbr = nbr
        self.port = port
        self.directed = bool(directed)
        self.complete = bool(complete)
        if validate:
            self._validate()

    def _validate(self):
        n, d = self.nbr.shape
        if self.nbr.min() < 0 or self.nbr.max() >= n:
            raise DomainError("neighbor index out of range")
        if self.directed:
            indeg = np.bincount(self.nbr.ravel(), minlength=n)
            if np.any(indeg != d):
                raise IrregularGraphError("directed graph is not in-regular")
            return
        if self.port.min() < 0 or self.port.max() >= d:
            raise DomainError("port index out of range")
        v = np.arange(n)[:, None]
        i = np.arange(d)[None, :]
        back_v = self.nbr[self.nbr, self.port]
        back_i = self.port[self.nbr, self.port]
        if not (np.array_equal(back_v, np.broadcast_to(v, (n, d)))
                and np.array_equal(back_i, np.broadcast_to(i, (n, d)))):
            raise DomainError("rotation map is not an involution")

    @property
    def n(self):
        return self.nbr.shape[0]

    @property
    def d(self):
        return self.nbr.shape[1]

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"RotationGraph(n={self.n}, d={self.d}, {kind})"

    def rot(self, v, i):
        u = int(self.nbr[v, i])
        return (u, -1) if self.directed else (u, int(self.port[v, i]))

    def adjacency_counts(self):
        """Dense C[u, v] = number of ports of v leading to u."""
        n, d = self.nbr.shape
        C = np.zeros((n, n), dtype=np.int64)
        np.add.at(C, (self.nbr.ravel(), np.repeat(np.arange(n), d)), 1)
        return C

    def operator(self):
        """Normalized adjacency as a sparse matrix, A[u, v] = C[u, v] / d."""
        n, d = self.nbr.shape
        rows = self.nbr.ravel()
        cols = np.repeat(np.arange(n), d)
        A = sp.csr_matrix((np.full(n * d, 1.0 / d), (rows, cols)), shape=(n, n))
        A.sum_duplicates()
        return A

    def same_rotation(self, other):
        return (self.directed == other.directed and np.array_equal(self.nbr, other.nbr)
                and (self.directed or np.array_equal(self.port, other.port)))


@dataclass(frozen=True)
class LocalInversion:
    """Port bijection phi with x[j] = x' implying x'[phi(j)] = x."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.int64)
        if not np.array_equal(np.sort(phi), np.arange(len(phi))):
            raise DomainError("phi is not a bijection")
        object.__setattr__(self, "phi", phi)


def check_local_inversion(g, phi):
    """Full scan of the local-inversion property."""
    if g.directed:
        raise DomainError("local inversion needs an undirected graph")
    phi = phi.phi if isinstance(phi, LocalInversion) else np.asarray(phi, dtype=np.int64)
    if len(phi) != g.d:
        return False
    back = g.nbr[g.nbr, phi[None, :]]
    return bool(np.all(back == np.arange(g.n)[:, None]))


def lambda_of(g, tol=1e-9, *, dense_cap=None, seed=0, method="auto"):
    """max(|lambda_2|, |lambda_n|) of the normalized adjacency (singular value if directed)."""
    if not tol > 0:
        raise DomainError("tol must be > 0")
    if g.complete:
        return SpectralReport(0.0, "dense", 0.0, 0, g.directed)
    cap = _config.dense_cap(dense_cap)
    if g.n <= cap:
        A = g.adjacency_counts() / g.d
        return SpectralReport(deflated_dense(A, symmetric=not g.directed), "dense", 0.0, 0, g.directed)
    A = g.operator()
    At = A.T.tocsr()
    return deflated_power(lambda X: A @ X, lambda X: At @ X, g.n,
                          symmetric=not g.directed, tol=tol, seed=seed, method=method)


def graph_power(g, k):
    """k-th power: port strings of length k (big-endian), return port string reversed."""
    if g.directed:
        raise DomainError("graph_power needs an undirected graph")
    k = int(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    if k == 1:
        return g
    n, d = g.n, g.d
    if n * d**k > _config.PORT_CAP:
        raise CapacityError(f"power graph with {n}*{d}^{k} ports above the port cap")
    cur = np.arange(n, dtype=np.int64)[:, None]
    back = np.zeros((n, 1), dtype=np.int64)
    for step in range(k):
        nxt = g.nbr[cur]
        ret = g.port[cur]
        back = ret * d**step + back[:, :, None]
        cur = nxt.reshape(n, -1)
        back = back.reshape(n, -1)
    return RotationGraph(cur, back)


def diameter(g):
    """Exact diameter by breadth-first search; math.inf when disconnected."""
    A = sp.csr_matrix((np.ones(g.n * g.d), (np.repeat(np.arange(g.n), g.d), g.nbr.ravel())),
                      shape=(g.n, g.n))
    best = 0.0
    chunk = max(1, 2**22 // g.n)
    for lo in range(0, g.n, chunk):
        dist = csgraph.shortest_path(A, method="D", directed=True, unweighted=True,
                                     indices=np.arange(lo, min(g.n, lo + chunk)))
        m = dist.max()
        if not np.isfinite(m):
            return math.inf
        best = max(best, m)
    return int(best)


def diameter_bound_steps(lam, n):
    """Smallest t with lam^t < 1/n, after which every A^t e_g has full support."""
    if lam <= 0:
        return 1
    if lam >= 1:
        return math.inf
    t = max(1, math.ceil(math.log(n) / -math.log(lam)))
    while lam**t >= 1.0 / n:
        t += 1
    return t


# --- constructors ---------------------------------------------------------

def cycle_graph(n):
    v = np.arange(n)
    nbr = np.stack([(v + 1) % n, (v - 1) % n], axis=1)
    port = np.tile([1, 0], (n, 1))
    return RotationGraph(nbr, port)


def complete_graph(n):
    """K_n without self-loops."""
    if n < 2:
        raise DomainError("K_n needs n >= 2")
    v = np.arange(n)[:, None]
    i = np.arange(n - 1)[None, :]
    u = np.where(i < v, i, i + 1)
    j = np.where(v < u, v, v - 1)
    return RotationGraph(u, j)


class CompleteGraph(RotationGraph):
    """A_J on n vertices: port i of every vertex leads to vertex i, returning on port v.

    The rotation tables are broadcast views built on first access, so huge n
    is fine as long as only ``n``, ``d`` and ``complete`` are consulted.
    """

    def __init__(self, n):
        n = int(n)
        if n < 1:
            raise DomainError("complete graph needs n >= 1")
        self._n = n
        self.directed = False
        self.complete = True

    @property
    def n(self):
        return self._n

    @property
    def d(self):
        return self._n

    @property
    def nbr(self):
        if self._n * self._n > _config.PORT_CAP:
            raise CapacityError(f"complete graph on {self._n} vertices above the port cap")
        return np.broadcast_to(np.arange(self._n, dtype=np.int64)[None, :], (self._n, self._n))

    @property
    def port(self):
        return self.nbr.T

    def __repr__(self):
        return f"CompleteGraph(n={self._n})"


def complete_graph_with_loops(n):
    """The graph of A_J: every vertex has one port to every vertex (lambda = 0)."""
    return CompleteGraph(n)


def circulant_graph(n, shifts):
    """Cay(Z_n, shifts) for an inverse-closed shift list; phi pairs s with -s."""
    shifts = [int(s) % n for s in shifts]
    d = len(shifts)
    phi = np.empty(d, dtype=np.int64)
    used = set()
    for i, s in enumerate(shifts):
        if i in used:
            continue
        partner = next((j for j in range(d) if j not in used and j != i and shifts[j] == (-s) % n), None)
        if (-s) % n == s:
            partner = i
        if partner is None:
            raise DomainError("shift list is not inverse-closed")
        phi[i], phi[partner] = partner, i
        used.update((i, partner))
    v = np.arange(n)[:, None]
    nbr = (v + np.array(shifts)[None, :]) % n
    return RotationGraph(nbr, np.broadcast_to(phi, (n, d)).copy())


def petersen_graph():
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return from_edges(10, 3, outer + spokes + inner)


def from_edges(n, d, edges):
    """Undirected multigraph from an edge list; ports are assigned in input order."""
    nbr = np.full((n, d), -1, dtype=np.int64)
    port = np.full((n, d), -1, dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise DomainError(f"edge ({u}, {v}) out of range")
        if fill[u] >= d or fill[v] >= d + (0 if u != v else -1):
            raise IrregularGraphError(f"vertex degree exceeds {d}")
        i = fill[u]
        fill[u] += 1
        j = fill[v]
        fill[v] += 1
        nbr[u, i], port[u, i] = v, j
        nbr[v, j], port[v, j] = u, i
    if np.any(fill != d):
        bad = int(np.flatnonzero(fill != d)[0])
        raise IrregularGraphError(f"vertex {bad} has degree {int(fill[bad])}, expected {d}")
    return RotationGraph(nbr, port)


def random_regular_graph(n, d, seed):
    """Random d-regular multigraph from a uniformly random pairing of the n*d ports."""
    if (n * d) % 2:
        raise DomainError("n*d must be even")
    rng = np.random.default_rng(seed)
    half = rng.permutation(n * d).reshape(-1, 2)
    nbr = np.empty(n * d, dtype=np.int64)
    port = np.empty(n * d, dtype=np.int64)
    a, b = half[:, 0], half[:, 1]
    nbr[a], port[a] = b // d, b % d
    nbr[b], port[b] = a // d, a % d
    return RotationGraph(nbr.reshape(n, d), port.reshape(n, d))


def edge_list(g):
    """Each undirected edge once (as (v, i, u, j) with (v, i) <= (u, j))."""
    out = []
    for v in range(g.n):
        for i in range(g.d):
            u, j = g.rot(v, i)
            if (v, i) <= (u, j):
                out.append((v, i, u, j))
    return out
