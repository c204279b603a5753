"""Expander-walk amplification of generator multisets.

A walk of length t is a vertex sequence (x_0, ..., x_t) with x_{j+1} = x_j[i_j].
Walks are ordered by start vertex, then by the port string (i_0, ..., i_{t-1})
read as a big-endian base-d number.  The amplified element of a walk is the
newest-first product S[x_t] ... S[x_0].
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _config
from ._errors import CapacityError, CertificationError, DomainError, PreconditionError
from ._validation import check_graph, check_multiset, check_natural, check_unit_interval
from .groups import GeneratorMultiset, bias_exact

BLOCK = 1 << 16


class WalkCollection:
    """All n * d^t walks of length t on a graph, in canonical order."""

    def __init__(self, base, t, budget=None):
        check_graph(base)
        self.base = base
        self.t = check_natural(t, "t", 0)
        self.count = base.n * base.d**self.t
        budget = _config.WALK_BUDGET if budget is None else budget
        self.mode = "explicit" if self.count <= budget else "streaming"

    def __len__(self):
        return self.count

    def __repr__(self):
        return f"WalkCollection(n={self.base.n}, d={self.base.d}, t={self.t}, {self.mode})"

    def decode(self, index):
        """Walks for an array of canonical indices, as an (m, t+1) vertex array."""
        index = np.asarray(index, dtype=np.int64)
        d, t = self.base.d, self.t
        span = d**t
        out = np.empty((len(index), t + 1), dtype=np.int64)
        out[:, 0] = index // span
        rest = index % span
        nbr = self.base.nbr
        for j in range(t):
            span //= d
            digit = rest // span
            rest = rest % span
            out[:, j + 1] = nbr[out[:, j], digit]
        return out

    def blocks(self, size=BLOCK):
        if self.count >= 2**62:
            raise CapacityError("walk collection too large to stream")
        for lo in range(0, self.count, size):
            yield self.decode(np.arange(lo, min(self.count, lo + size)))

    def walks(self):
        if self.mode != "explicit":
            raise CapacityError(f"{self.count} walks above the explicit budget; use fold()")
        return np.concatenate(list(self.blocks()), axis=0) if self.count else np.empty((0, self.t + 1), np.int64)

    def fold(self, fn, init):
        acc = init
        for block in self.blocks():
            acc = fn(acc, block)
        return acc

    def __iter__(self):
        for block in self.blocks():
            yield from (tuple(int(v) for v in row) for row in block)


def enumerate_walks(X, t, budget=None):
    return WalkCollection(X, t, budget)


def walk_bias_bound(lambda_x, lambda0, t, mode="constant"):
    for name, v in (("lambda_x", lambda_x), ("lambda0", lambda0)):
        check_unit_interval(v, name, open_left=False, open_right=False)
    t = check_natural(t, "t", 0)
    e = t // 2
    if mode == "constant":
        base = 2 * lambda_x + lambda0
    elif mode == "any-bias":
        base = 1 - (1 - lambda_x) ** 2 * (1 - lambda0)
    else:
        raise DomainError(f"unknown bound mode {mode!r}")
    if base >= 1:
        return 1.0
    return float(min(1.0, max(0.0, base**e)))


def simple_amplification_steps(lambda1, target):
    """t = ceil(2(1 + log_{lambda1}(target)))."""
    check_unit_interval(lambda1, "lambda1")
    check_unit_interval(target, "target", open_right=False)
    return max(0, math.ceil(2 * (1 + math.log(target) / math.log(lambda1)) - 1e-12))


# --- exact counts --------------------------------------------------------

def _wide(total):
    return object if total >= 2**62 else np.int64


def convolve_counts(G, newer, older, total=None):
    """Counts of products k*h with k drawn from ``newer`` and h from ``older``."""
    if total is None:
        total = int(sum(int(v) for v in newer)) * int(sum(int(v) for v in older))
    dtype = _wide(total * (G.order if G.kind == "xor-bits" else 1))
    newer = np.asarray(newer).astype(dtype)
    older = np.asarray(older).astype(dtype)
    if G.kind == "xor-bits":
        from .groups import walsh_hadamard

        spec = walsh_hadamard(newer) * walsh_hadamard(older)
        out = walsh_hadamard(spec)
        if dtype is object:
            return np.array([v // G.order for v in out], dtype=object)
        return out // G.order
    out = np.zeros(G.order, dtype=dtype)
    support = np.flatnonzero(newer != 0)
    step = max(1, _config.STATE_BUDGET // (8 * G.order))
    for lo in range(0, len(support), step):
        chunk = support[lo:lo + step]
        rows = G.left_multiplication(chunk)
        for k, r in zip(chunk, rows):
            out[r] += newer[k] * older
    return out


class WalkCountDP:
    """Exact per-(endpoint, product) walk counts, advanced one step at a time.

    state[x, g] = number of walks ending at x whose product S[x_t]...S[x_0] is g.
    """

    def __init__(self, S, X):
        G = S.group
        G.require_enumerable()
        S = S.materialize()
        if X.n * G.order > _config.STATE_BUDGET:
            raise CapacityError(f"{X.n} x {G.order} walk states above budget")
        self.G, self.S, self.X = G, S, X
        self.idx = G.index(S.elements)
        self.left = G.left_multiplication(self.idx)
        import scipy.sparse as sp

        n, d = X.nbr.shape
        self.C = sp.csr_matrix((np.ones(n * d, dtype=np.int64), (X.nbr.ravel(), np.repeat(np.arange(n), d))),
                               shape=(n, n))
        self.C.sum_duplicates()
        self.state = np.zeros((X.n, G.order), dtype=np.int64)
        self.state[np.arange(X.n), self.idx] = 1
        self.t = 0
        self.total = X.n

    def step(self):
        self.total *= self.X.d
        if self.total >= 2**62:
            raise CapacityError("walk counts overflow int64")
        moved = self.C @ self.state
        new = np.empty_like(moved)
        np.put_along_axis(new, self.left, moved, axis=1)
        self.state = new
        self.t += 1

    def histogram(self):
        return self.state.sum(axis=0)


class ConvolutionPower:
    """Walks on A_J: the product histogram is the (t+1)-fold convolution power."""

    def __init__(self, S):
        self.G = S.group
        self.base = S.histogram()
        self.hist = self.base
        self.size = S.size
        self.total = S.size
        self.t = 0

    def step(self):
        self.total *= self.size
        self.hist = convolve_counts(self.G, self.base, self.hist, self.total)
        self.t += 1

    def histogram(self):
        return self.hist


def amplify_via_walks(S, X, t, *, form="auto"):
    """S' = { S[x_t] ... S[x_0] : walks of length t on X }, vertices identified with entries of S.

    form: "explicit" (canonical order), "counted" (exact histogram) or "auto".
    """
    check_multiset(S)
    check_graph(X)
    t = check_natural(t, "t", 0)
    if X.n != S.size:
        raise DomainError(f"aux graph has {X.n} vertices but |S| = {S.size}")
    if t == 0:
        return S
    count = X.n * X.d**t
    if form == "auto":
        form = "explicit" if S.is_explicit and count <= _config.WALK_BUDGET else "counted"
    if form == "explicit":
        if count > _config.WALK_BUDGET:
            raise CapacityError(f"{count} walks above the explicit budget")
        G = S.group
        el = S.elements
        W = WalkCollection(X, t)
        parts = []
        for block in W.blocks():
            acc = el[block[:, 0]]
            for j in range(1, t + 1):
                acc = G.multiply(el[block[:, j]], acc)
            parts.append(acc)
        return GeneratorMultiset(G, np.concatenate(parts), symmetric=None)
    if X.complete:
        engine = ConvolutionPower(S)
    else:
        engine = WalkCountDP(S, X)
    for _ in range(t):
        engine.step()
    return GeneratorMultiset(S.group, counts=engine.histogram(), symmetric=None)


# --- the two-stage pipeline ---------------------------------------------

@dataclass
class StageReport:
    name: str
    bias_in: float
    target: float
    eps0: float
    lambda1: float
    aux_strategy: str
    aux_lambda: float
    aux_degree: int
    aux_vertices: int
    replication: int
    pad: int
    bias_padded: float
    t_formula: int
    t_used: int
    size: int
    bias_out: float
    bound: float

    def lines(self, prefix):
        out = []
        for key, val in self.__dict__.items():
            if key == "name":
                continue
            out.append((f"{prefix}.{key}", val))
        return out


@dataclass
class PipelineReport:
    lambda0: float
    target: float
    beta: float
    lambda_prime: float
    stages: list = field(default_factory=list)
    size_in: int = 0
    size_out: int = 0
    bias_out: float = 1.0

    @property
    def word_length(self):
        """Number of input elements multiplied into each output element."""
        w = 1
        for st in self.stages:
            w *= st.t_used + 1
        return w


def _cheap_bias(G):
    return G.kind == "xor-bits" or G.order <= _config.dense_cap()


def _bias_of_hist(G, hist, symmetric=True):
    S = GeneratorMultiset(G, counts=hist, symmetric=symmetric)
    return bias_exact(S)


def _default_provider():
    from .zoo import ExpanderProvider

    return ExpanderProvider("auto")


def simple_amplification(S, target, eps0, provider, lambda0=None, name="stage"):
    """One application of the walk lemma: aux graph with lambda <= eps0*lambda0, t from the
    step formula, stopped at the first t whose certified bias already meets the target."""
    G = S.group
    lam0 = bias_exact(S) if lambda0 is None else lambda0
    lam1 = (1 + 2 * eps0) * lam0
    if lam1 >= 1:
        raise PreconditionError(f"lambda1 = {lam1} >= 1")
    aux = provider(S.size, eps0 * lam0)
    X = aux.graph
    Sp = aux.prepare(S) if (aux.replication != 1 or aux.pad) else S
    exact = _cheap_bias(G)
    lam0p = bias_exact(Sp) if (Sp is not S and exact) else (lam0 if Sp is S else min(1.0, lam0 + aux.theta))
    t_formula = simple_amplification_steps(lam1, target)
    t_cap = t_formula
    if 2 * aux.lam + lam0p >= 1:
        # padding pushed the constant-bias bound over 1; the any-bias bound still decays
        rate = 1 - (1 - aux.lam) ** 2 * (1 - lam0p)
        t_cap = max(t_formula, 2 * math.ceil(math.log(target) / math.log(rate)) + 1)
    if X.complete:
        engine = ConvolutionPower(Sp)
    elif Sp.is_explicit and X.n * X.d <= _config.WALK_BUDGET and X.n * G.order <= _config.STATE_BUDGET:
        engine = WalkCountDP(Sp, X)
    else:
        raise CapacityError("auxiliary walk state space above budget")

    def certified(t):
        if X.complete:
            return lam0p ** (t + 1)
        return min(walk_bias_bound(aux.lam, lam0p, t, "constant"), walk_bias_bound(aux.lam, lam0p, t, "any-bias"))

    t_used, measured = None, None
    for t in range(0, t_cap + 1):
        if t > 0:
            engine.step()
        if exact and t > 0:
            measured = _bias_of_hist(G, engine.histogram(), Sp.symmetric)
            if measured <= target:
                t_used = t
                break
        elif certified(t) <= target and t > 0:
            t_used = t
            break
    if t_used is None:
        raise CertificationError(f"{name}: bias target {target} not reached within t = {t_cap}")
    hist = engine.histogram()
    size = X.n * X.d**t_used
    if Sp.is_explicit and size <= _config.WALK_BUDGET and not X.complete:
        out = amplify_via_walks(Sp, X, t_used, form="explicit")
    elif Sp.is_explicit and X.complete and size <= _config.WALK_BUDGET:
        out = amplify_via_walks(Sp, X, t_used, form="explicit")
    else:
        out = GeneratorMultiset(G, counts=hist, symmetric=None)
    if measured is None:
        measured = bias_exact(out)
    report = StageReport(name, lam0, target, eps0, lam1, aux.strategy, aux.lam, X.d, X.n,
                         aux.replication, aux.pad, lam0p, t_formula, t_used, out.size, measured, certified(t_used))
    return out, report


def exp_walk_pipeline(S, lam, beta=1.0, provider=None):
    """Bias lam with |S'| = O(|S| / lam^(4+beta)): boost to a constant, then amplify with eps0 = 1/2.

    Returns (S', PipelineReport).
    """
    check_multiset(S, symmetric=True)
    lam = check_unit_interval(lam, "lambda")
    beta = check_unit_interval(beta, "beta", open_right=False)
    provider = _default_provider() if provider is None else provider
    lam0 = bias_exact(S)
    if lam0 >= 1 - 1e-12:
        raise PreconditionError(f"initial bias {lam0} is not below 1")
    lam_prime = 0.9 * min(0.5, 0.75 ** (4 * beta))
    report = PipelineReport(lam0, lam, beta, lam_prime, size_in=S.size)
    cur, cur_bias = S, lam0
    if cur_bias > lam:
        stage1_target = max(lam, lam_prime)
        if cur_bias > stage1_target:
            eps0 = (1 - cur_bias) / (4 * cur_bias)
            cur, st = simple_amplification(cur, stage1_target, eps0, provider, cur_bias, "stage1")
            report.stages.append(st)
            cur_bias = st.bias_out
        if cur_bias > lam:
            cur, st = simple_amplification(cur, lam, 0.5, provider, cur_bias, "stage2")
            report.stages.append(st)
            cur_bias = st.bias_out
    if cur_bias > lam + 1e-12:
        raise CertificationError(f"final bias {cur_bias} above target {lam}")
    report.size_out = cur.size
    report.bias_out = cur_bias
    return cur, report
