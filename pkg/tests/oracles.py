"""Reference computations that share no code path with the package under test."""
import itertools
import math

import numpy as np


def character_bias_bruteforce(elements, m):
    """max over a != 0 of |mean (-1)^<a, s>|, by direct enumeration of characters."""
    el = np.asarray(elements, dtype=np.int64)
    best = 0.0
    for lo in range(1, 1 << m, 256):
        a = np.arange(lo, min(1 << m, lo + 256), dtype=np.int64)
        bits = np.bitwise_and(a[:, None], el[None, :])
        parity = np.zeros(bits.shape, dtype=np.int64)
        for i in range(m):
            parity ^= (bits >> i) & 1
        vals = np.abs((1 - 2 * parity).mean(axis=1))
        best = max(best, float(vals.max()))
    return best


def character_bias_weighted(weights, m):
    """Same oracle for a weight vector over Z_2^m (index = element)."""
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.sum()
    xs = np.arange(1 << m, dtype=np.int64)
    best = 0.0
    for a in range(1, 1 << m):
        parity = np.zeros(len(xs), dtype=np.int64)
        bits = xs & a
        for i in range(m):
            parity ^= (bits >> i) & 1
        best = max(best, abs(float(((1 - 2 * parity) * w).sum())))
    return best


def graph_lambda_full_spectrum(nbr, directed=False):
    """Drop one unit eigenvalue from the full spectrum of the normalized adjacency."""
    nbr = np.asarray(nbr)
    n, d = nbr.shape
    A = np.zeros((n, n))
    for v in range(n):
        for u in nbr[v]:
            A[u, v] += 1.0 / d
    if directed:
        sv = np.linalg.svd(A - np.full((n, n), 1.0 / n), compute_uv=False)
        return float(sv[0])
    ev = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1]
    return float(ev[1]) if n > 1 else 0.0


def cycle_lambda(n):
    """|eigenvalues| of C_n are |cos(2 pi k / n)|; the largest nontrivial one."""
    return max(abs(math.cos(2 * math.pi * k / n)) for k in range(1, n))


# --- Young's orthogonal form ------------------------------------------------------


def partitions(n, largest=None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in partitions(n - first, first):
            yield (first,) + rest


def standard_tableaux(shape):
    """All standard Young tableaux as dicts value -> (row, col)."""
    n = sum(shape)
    out = []

    def grow(pos, filled, k):
        if k == n:
            out.append(dict(pos))
            return
        for r, length in enumerate(shape):
            c = filled[r]
            if c < length and (r == 0 or filled[r - 1] > c):
                filled[r] += 1
                pos[k] = (r, c)
                grow(pos, filled, k + 1)
                filled[r] -= 1
                del pos[k]

    grow({}, [0] * len(shape), 0)
    return out


def young_adjacent_matrices(shape):
    """rho(s_i) for the adjacent transpositions s_i = (i, i+1), 0-based i."""
    tabs = standard_tableaux(shape)
    index = {tuple(sorted(t.items())): j for j, t in enumerate(tabs)}
    n = sum(shape)
    dim = len(tabs)
    mats = []
    for i in range(n - 1):
        M = np.zeros((dim, dim))
        for j, t in enumerate(tabs):
            (r1, c1), (r2, c2) = t[i], t[i + 1]
            axial = (c2 - r2) - (c1 - r1)
            M[j, j] = 1.0 / axial
            swapped = dict(t)
            swapped[i], swapped[i + 1] = t[i + 1], t[i]
            key = tuple(sorted(swapped.items()))
            if key in index:
                M[index[key], j] = math.sqrt(1 - 1.0 / axial**2)
        mats.append(M)
    return mats


def symmetric_irreps(n):
    """{shape: {perm tuple: matrix}} for every irrep of Sym_n, with (ab)(i) = a(b(i))."""
    out = {}
    ident = tuple(range(n))
    gens = []
    for i in range(n - 1):
        s = list(range(n))
        s[i], s[i + 1] = s[i + 1], s[i]
        gens.append(tuple(s))
    for shape in partitions(n):
        mats = young_adjacent_matrices(shape)
        dim = mats[0].shape[0] if mats else 1
        rho = {ident: np.eye(dim)}
        frontier = [ident]
        while frontier:
            nxt = []
            for g in frontier:
                for s, M in zip(gens, mats):
                    sg = tuple(s[g[k]] for k in range(n))
                    if sg not in rho:
                        rho[sg] = M @ rho[g]
                        nxt.append(sg)
            frontier = nxt
        out[shape] = rho
    return out


def symmetric_bias_via_irreps(elements, n, irreps=None):
    irreps = symmetric_irreps(n) if irreps is None else irreps
    best = 0.0
    for shape, rho in irreps.items():
        if shape == (n,):
            continue
        avg = sum(rho[tuple(int(v) for v in e)] for e in elements) / len(elements)
        best = max(best, float(np.linalg.svd(np.atleast_2d(avg), compute_uv=False)[0]))
    return best


def all_permutations(n):
    return [tuple(p) for p in itertools.permutations(range(n))]


# --- GF(2^k) ------------------------------------------------------------------------


def gf2_mul(a, b, k, poly):
    """Schoolbook carry-less product reduced by ``poly`` (which includes the x^k term)."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> k:
            a ^= poly
    return out


def is_irreducible_gf2(poly, k):
    """Trial division by every polynomial of degree 1..k/2."""
    for d in range(1, k // 2 + 1):
        for q in range(1 << d, 1 << (d + 1)):
            r = poly
            while r.bit_length() - 1 >= d:
                r ^= q << (r.bit_length() - 1 - d)
            if r == 0:
                return False
    return True
