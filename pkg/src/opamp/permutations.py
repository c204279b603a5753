"""Permutation decompositions of regular graphs, permutation amplification, monotone maps.

Permutation arrays hold 0-based images: perm[v] is the image of v, and its matrix
has P[perm[v], v] = 1.  Products follow the group convention (a*b)(v) = a(b(v)).
"""
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _config
from ._errors import CapacityError, CertificationError, DomainError, IrregularGraphError, PreconditionError
from ._validation import check_graph, check_unit_interval
from .graphs import RotationGraph
from .spectral import deflated_dense, deflated_power

# --- matching ---------------------------------------------------------------


def hopcroft_karp(n_left, n_right, adj):
    """Maximum matching in a bipartite graph; adj[u] lists right vertices in preference order.

    Returns match_left (right partner of each left vertex, or -1).
    """
    INF = math.inf
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    dist = [0] * n_left

    def bfs():
        q = deque()
        for u in range(n_left):
            if match_l[u] == -1:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = INF
        found = False
        while q:
            u = q.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w == -1:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return found

    def dfs(root):
        # iterative augmenting-path search along the BFS layers
        stack = [(root, iter(adj[root]))]
        path = []
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                w = match_r[v]
                if w == -1:
                    path.append((u, v))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[w] == dist[u] + 1:
                    path.append((u, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[u] = INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in range(n_left):
            if match_l[u] == -1:
                dfs(u)
    return np.array(match_l, dtype=np.int64)


@dataclass
class PermutationList:
    """Permutations of [n]; ``ports[j][v]`` optionally records the graph port realizing perms[j][v]."""

    perms: np.ndarray
    ports: np.ndarray = None
    words: list = None

    def __post_init__(self):
        perms = np.asarray(self.perms, dtype=np.int64)
        if perms.ndim != 2 or perms.shape[0] == 0:
            raise DomainError("perms must be a non-empty (count, n) array")
        n = perms.shape[1]
        if not np.all(np.sort(perms, axis=1) == np.arange(n)[None, :]):
            raise DomainError("an entry is not a bijection of [n]")
        self.perms = perms

    @property
    def n(self):
        return self.perms.shape[1]

    @property
    def count(self):
        return self.perms.shape[0]

    def __len__(self):
        return self.count

    def __repr__(self):
        return f"PermutationList(n={self.n}, count={self.count})"

    def matrix_counts(self):
        """Integer matrix sum_j P_j with P_j[perm_j[v], v] = 1."""
        n = self.n
        flat = self.perms * n + np.arange(n)[None, :]
        return np.bincount(flat.ravel(), minlength=n * n).reshape(n, n)

    def average(self):
        return self.matrix_counts() / self.count

    def inverses(self):
        return PermutationList(np.argsort(self.perms, axis=1, kind="stable"))

    def same_multiset(self, other):
        a = self.perms[np.lexsort(self.perms.T[::-1])]
        b = other.perms[np.lexsort(other.perms.T[::-1])]
        return a.shape == b.shape and bool(np.array_equal(a, b))


def konig_decompose(g):
    """d permutations whose matrices average to A_g, one perfect matching of the double cover per round."""
    check_graph(g)
    n, d = g.n, g.d
    C = g.adjacency_counts()
    if np.any(C.sum(axis=0) != d) or np.any(C.sum(axis=1) != d):
        raise IrregularGraphError("graph is not regular")
    remaining = C.T.copy()  # remaining[v, u]: unused ports of v leading to u
    used = np.zeros((n, d), dtype=bool)
    perms = np.empty((d, n), dtype=np.int64)
    ports = np.empty((d, n), dtype=np.int64)
    for j in range(d):
        adj = [list(np.flatnonzero(remaining[v])) for v in range(n)]
        match = hopcroft_karp(n, n, adj)
        if np.any(match < 0):
            raise AssertionError("regular bipartite double cover without a perfect matching")
        perms[j] = match
        for v in range(n):
            u = match[v]
            # the lowest unused port of v leading to u realizes this edge
            cand = np.flatnonzero((g.nbr[v] == u) & ~used[v])
            ports[j, v] = cand[0]
            used[v, cand[0]] = True
            remaining[v, u] -= 1
    return PermutationList(perms, ports, [[j] for j in range(d)])


def reconstruct_counts(P):
    return P.matrix_counts()


# --- certification -------------------------------------------------------------


def permutation_lambda(P, tol=1e-9, *, dense_cap=None, seed=0):
    """Deflated lambda of the n x n average (the standard-representation bias)."""
    n = P.n
    cap = _config.dense_cap(dense_cap)
    C = P.matrix_counts()
    symmetric = bool(np.array_equal(C, C.T))
    if n <= cap:
        return deflated_dense(C / P.count, symmetric=symmetric)
    import scipy.sparse as sp

    A = sp.csr_matrix(C / P.count)
    At = A.T.tocsr()
    return deflated_power(lambda X: A @ X, lambda X: At @ X, n, symmetric=symmetric, tol=tol, seed=seed).value


# --- amplification -------------------------------------------------------------


@dataclass
class PermAmpReport:
    engine: str
    lambda0: float
    target: float
    stages: list = field(default_factory=list)
    lambda_out: float = 1.0
    size_out: int = 0
    composition_length: int = 1
    pad_penalty: float = 0.0

    def lines(self):
        out = [("engine", self.engine), ("lambda0", self.lambda0), ("target", self.target),
               ("lambda_out", self.lambda_out), ("size_out", self.size_out),
               ("composition_length", self.composition_length)]
        for i, st in enumerate(self.stages):
            for k, v in st.items():
                out.append((f"stage{i}.{k}", v))
        return out


class _Words:
    """Current permutations with the base-permutation word (oldest first) behind each one."""

    def __init__(self, perms, words):
        self.perms = np.asarray(perms, dtype=np.int64)
        self.words = [list(w) for w in words]

    @property
    def size(self):
        return len(self.perms)

    def prepared(self, replication, pad):
        n = self.perms.shape[1]
        perms = np.concatenate([np.tile(self.perms, (replication, 1)),
                                np.broadcast_to(np.arange(n), (pad, n))])
        words = self.words * replication + [[] for _ in range(pad)]
        return _Words(perms, words)

    def compose(self, idx):
        """One product per row of idx (oldest first): perms[idx[:, -1]] o ... o perms[idx[:, 0]]."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.shape[0] * self.perms.shape[1] > _config.WALK_BUDGET * 8:
            raise CapacityError(f"{idx.shape[0]} permutation products above the explicit budget")
        acc = self.perms[idx[:, 0]]
        for k in range(1, idx.shape[1]):
            acc = np.take_along_axis(self.perms[idx[:, k]], acc, axis=1)
        words = [sum((self.words[i] for i in row), []) for row in idx.tolist()]
        return _Words(acc, words)

    def as_list(self):
        return PermutationList(self.perms, None, self.words)


def _measure(W):
    return permutation_lambda(PermutationList(W.perms))


def _walk_stage(W, cur, target, provider, eps0, max_t):
    from .walks import WalkCollection

    aux = provider(W.size, eps0 * cur)
    X = aux.graph
    Wp = W.prepared(aux.replication, aux.pad) if (aux.replication != 1 or aux.pad) else W
    for t in range(1, max_t + 1):
        count = X.n * X.d**t
        if count > _config.WALK_BUDGET:
            raise CapacityError(f"{count} walks above the explicit budget")
        idx = WalkCollection(X, t).walks()
        out = Wp.compose(idx)
        lam = _measure(out)
        if lam <= target:
            return out, {"aux": aux.strategy, "aux_lambda": aux.lam, "aux_degree": X.d, "pad": aux.pad,
                         "t": t, "size": out.size, "lambda": lam}
    raise CertificationError(f"walk stage did not reach {target} within t = {max_t}")


def _eml_stage(W, cur, target, provider):
    aux_target = cur**2 if cur <= 0.25 else cur * cur * (1 - cur) / 2
    aux = provider(W.size, aux_target)
    X = aux.graph
    Wp = W.prepared(aux.replication, aux.pad) if (aux.replication != 1 or aux.pad) else W
    if X.complete:
        a, b = np.meshgrid(np.arange(X.n), np.arange(X.n), indexing="ij")
        idx = np.stack([a.ravel(), b.ravel()], axis=1)
    else:
        idx = np.stack([np.repeat(np.arange(X.n), X.d), X.nbr.reshape(-1)], axis=1)
    out = Wp.compose(idx)
    lam = _measure(out)
    return out, {"aux": aux.strategy, "aux_lambda": aux.lam, "aux_degree": X.d, "pad": aux.pad,
                 "t": 1, "size": out.size, "lambda": lam}


def _swide_stage(W, target, s, max_t):
    from .groups import GeneratorMultiset, XorBits, cayley_graph
    from .swide import SWideProduct, SWideWalks

    bits = max(1, (W.size - 1).bit_length())
    pad = (1 << bits) - W.size
    Wp = W.prepared(1, pad) if pad else W
    X = cayley_graph(GeneratorMultiset(XorBits(bits), np.arange(1 << bits), symmetric=True))
    m = s * bits
    if m > 12:
        raise CapacityError(f"inner graph on Z_2^{m} above the permutation budget")
    T = GeneratorMultiset(XorBits(m), np.arange(1 << m), symmetric=True)
    P = SWideProduct(X, s, T)
    for t in range(1, max_t + 1):
        if P.walk_count(t) > _config.WALK_BUDGET:
            raise CapacityError(f"{P.walk_count(t)} s-wide walks above the explicit budget")
        idx = np.concatenate(list(SWideWalks(P, t).blocks()), axis=0)
        out = Wp.compose(idx)
        lam = _measure(out)
        if lam <= target:
            return out, {"aux": "cayley-full", "aux_lambda": 0.0, "aux_degree": X.d, "pad": pad,
                         "t": t, "size": out.size, "lambda": lam, "s": s}
    raise CertificationError(f"s-wide stage did not reach {target} within t = {max_t}")


def amplify_permutations(P, lam, engine="walks", *, provider=None, s=2, max_t=64, max_rounds=8):
    """Permutation list whose average has deflated lambda <= lam, built from products of P.

    Returns (PermutationList with per-entry words, PermAmpReport).
    """
    from .walks import _default_provider

    if not isinstance(P, PermutationList):
        P = PermutationList(P)
    lam = check_unit_interval(lam, "lambda")
    if engine not in ("walks", "swide", "eml"):
        raise DomainError(f"unknown engine {engine!r}")
    provider = _default_provider() if provider is None else provider
    lam0 = permutation_lambda(P)
    if lam0 >= 1 - 1e-12:
        raise PreconditionError(f"input average has deflated lambda {lam0}; it does not expand")
    words = P.words if P.words is not None else [[j] for j in range(P.count)]
    rep = PermAmpReport(engine, lam0, lam)
    if lam0 <= lam:
        rep.lambda_out, rep.size_out = lam0, P.count
        return PermutationList(P.perms, P.ports, words), rep
    W, cur = _Words(P.perms, words), lam0
    for _ in range(max_rounds):
        if cur <= lam:
            break
        if engine == "walks":
            eps0 = (1 - cur) / (4 * cur) if cur > 0.5 else 0.5
            W, info = _walk_stage(W, cur, lam, provider, eps0, max_t)
        elif engine == "eml":
            W, info = _eml_stage(W, cur, lam, provider)
        else:
            W, info = _swide_stage(W, lam, s, max_t)
        rep.stages.append(info)
        cur = info["lambda"]
    if cur > lam:
        raise CertificationError(f"{engine} engine stopped at lambda {cur} > {lam}")
    rep.lambda_out, rep.size_out = cur, W.size
    rep.composition_length = max(len(w) for w in W.words)
    return W.as_list(), rep


# --- whole-graph transformation ----------------------------------------------


@dataclass
class TransformReport:
    lambda0: float
    target: float
    lambda_out: float
    degree_in: int
    degree_out: int
    walk_length: int
    audited_edges: int
    amp: PermAmpReport = None


def _assemble_undirected(perms):
    """Ports j < D follow perms[j]; ports D + j follow the inverse, and rotate back to j."""
    D = perms.shape[0]
    inv = np.argsort(perms, axis=1, kind="stable")
    nbr = np.concatenate([perms, inv], axis=0).T.copy()
    n = nbr.shape[0]
    port = np.concatenate([np.arange(D) + D, np.arange(D)])
    return RotationGraph(nbr, np.broadcast_to(port, (n, 2 * D)).copy())


def replay_edge(g, base, word, v):
    """Follow the word's base permutations from v along g's own ports; returns the endpoint."""
    cur = int(v)
    for j in word:
        p = int(base.ports[j, cur])
        nxt = int(g.nbr[cur, p])
        if nxt != base.perms[j, cur]:
            raise AssertionError("base permutation disagrees with the graph port it claims")
        cur = nxt
    return cur


def locality_audit(g, base, out_list, samples=64, seed=0):
    """Replay sampled output edges (both orientations) as walks in g; returns the longest walk."""
    rng = np.random.default_rng(seed)
    D = out_list.count
    longest = 0
    for _ in range(samples):
        j = int(rng.integers(D))
        v = int(rng.integers(out_list.n))
        word = out_list.words[j]
        end = replay_edge(g, base, word, v)
        if end != out_list.perms[j, v]:
            raise AssertionError(f"output edge ({v}, port {j}) does not replay in the base graph")
        # the matching inverse port walks the same edges backwards
        start = int(np.flatnonzero(out_list.perms[j] == v)[0])
        if replay_edge(g, base, word, start) != v:
            raise AssertionError(f"inverse edge at ({v}, port {D + j}) does not replay")
        longest = max(longest, len(word))
    return longest


def transform_graph(g, lam, *, engine="walks", provider=None, audit_samples=64, seed=0):
    """Same vertex set, degree |P'| (doubled for the inverse ports), lambda <= lam."""
    from .graphs import lambda_of

    check_graph(g, undirected=True)
    lam = check_unit_interval(lam, "lambda")
    base = konig_decompose(g)
    lam0 = lambda_of(g).value
    if lam0 >= 1 - 1e-12:
        raise PreconditionError(f"base graph has lambda {lam0}")
    if lam >= lam0:
        return g, TransformReport(lam0, lam, lam0, g.d, g.d, 1, 0)
    amp, arep = amplify_permutations(base, lam, engine, provider=provider)
    X = _assemble_undirected(amp.perms)
    lam_out = lambda_of(X).value
    if lam_out > lam + 1e-9:
        raise CertificationError(f"transformed graph has lambda {lam_out} > {lam}")
    k = locality_audit(g, base, amp, audit_samples, seed)
    return X, TransformReport(lam0, lam, lam_out, g.d, X.d, k, audit_samples, arep)


# --- monotone maps ----------------------------------------------------------------


@dataclass(frozen=True)
class PartialMonotoneMap:
    """Strictly increasing partial map on [n] (0-based)."""

    n: int
    domain: tuple
    images: tuple

    def __post_init__(self):
        dom = tuple(int(v) for v in self.domain)
        img = tuple(int(v) for v in self.images)
        if len(dom) != len(img):
            raise DomainError("domain and images differ in length")
        if any(not 0 <= v < self.n for v in dom + img):
            raise DomainError("point outside [n]")
        if any(a >= b for a, b in zip(dom, dom[1:])):
            raise DomainError("domain must be strictly increasing")
        if any(a >= b for a, b in zip(img, img[1:])):
            raise DomainError("map is not strictly monotone")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "images", img)

    def __len__(self):
        return len(self.domain)

    def as_dict(self):
        return dict(zip(self.domain, self.images))

    def matrix(self):
        M = np.zeros((self.n, self.n), dtype=np.int64)
        if self.domain:
            M[list(self.images), list(self.domain)] = 1
        return M

    def compose(self, inner):
        """self o inner, defined where inner lands in self's domain."""
        mine = self.as_dict()
        pairs = [(x, mine[y]) for x, y in zip(inner.domain, inner.images) if y in mine]
        return PartialMonotoneMap(self.n, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))


def complement(f):
    """Match the points outside the domain to the points outside the image, in sorted order."""
    dom = sorted(set(range(f.n)) - set(f.domain))
    img = sorted(set(range(f.n)) - set(f.images))
    return PartialMonotoneMap(f.n, tuple(dom), tuple(img))


def union_permutation(f, fbar):
    if f.n != fbar.n:
        raise DomainError("maps live on different [n]")
    if set(f.domain) & set(fbar.domain) or set(f.images) & set(fbar.images):
        raise DomainError("union is not a bijection: overlapping domains or images")
    if len(f) + len(fbar) != f.n:
        raise DomainError("union is not a bijection: does not cover [n]")
    perm = np.empty(f.n, dtype=np.int64)
    perm[list(f.domain)] = f.images
    perm[list(fbar.domain)] = fbar.images
    return perm


def monotone_product_decompose(pairs, word):
    """Partial monotone maps whose matrices sum to P_(w_1) ... P_(w_k), P_i = M_(f_i) + M_(fbar_i).

    Sign patterns run in binary order (bit j set picks fbar for position j); maps
    with empty domain are dropped.
    """
    pairs = list(pairs)
    for f, fb in pairs:
        union_permutation(f, fb)
    word = [int(i) for i in word]
    if not word:
        raise DomainError("word must be non-empty")
    if any(not 0 <= i < len(pairs) for i in word):
        raise DomainError("word index out of range")
    out = []
    k = len(word)
    for pattern in range(1 << k):
        chosen = [pairs[i][(pattern >> j) & 1] for j, i in enumerate(word)]
        acc = chosen[-1]
        for g in reversed(chosen[:-1]):
            acc = g.compose(acc)
            if not len(acc):
                break
        if len(acc):
            out.append(acc)
    return out
