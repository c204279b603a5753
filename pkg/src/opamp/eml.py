"""Operator mixing lemma, edge-product squaring and the two-phase iterated amplification."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _config
from ._errors import CapacityError, CertificationError, DomainError, PreconditionError
from ._validation import check_graph, check_multiset, check_unit_interval
from .graphs import lambda_of
from .groups import GeneratorMultiset, bias_exact
from .operators import OperatorFunction, _opnorm, walk_operator_average

AGREEMENT_TOL = 1e-9


@dataclass(frozen=True)
class EmlReport:
    defect: float
    bound: float
    lambda_x: float
    max_norm: float
    factorized: float

    @property
    def margin(self):
        return self.bound - self.defect


def _edge_average(f, X):
    """E over ports (x, i) of f(x[i]) f(x)."""
    total = np.zeros((f.ell, f.ell), dtype=np.complex128)
    mats = f.mats
    for i in range(X.d):
        total += np.einsum("xij,xjk->ik", mats[X.nbr[:, i]], mats)
    return total / (X.n * X.d)


def eml_defect(f, X, *, lambda_x=None):
    """||E_edges f(x') f(x) - (E f)^2||, by the edge sum and by P Pi A Pi L."""
    if not isinstance(f, OperatorFunction):
        f = OperatorFunction(f)
    check_graph(X, undirected=True)
    if X.n != f.n:
        raise DomainError(f"graph has {X.n} vertices but f has {f.n}")
    mean = f.mean()
    sq = mean @ mean
    if X.complete:
        direct = sq
    else:
        direct = _edge_average(f, X)
    factor = walk_operator_average(f, X, 1) if not X.complete else sq
    d1 = _opnorm(direct - sq)
    d2 = _opnorm(factor - sq)
    if abs(d1 - d2) > AGREEMENT_TOL or np.max(np.abs(direct - factor)) > AGREEMENT_TOL:
        raise AssertionError(f"edge-sum and factorized defects disagree: {d1} vs {d2}")
    lam = lambda_of(X).value if lambda_x is None else float(lambda_x)
    mx = f.max_norm()
    return EmlReport(d1, lam * mx * mx, lam, mx, d2)


def eml_square(S, X):
    """One product S[x'] S[x] per port (x, i) with x' = x[i]; the complete graph gives all pairs."""
    from .walks import convolve_counts

    check_multiset(S)
    check_graph(X, undirected=True)
    if X.n != S.size:
        raise DomainError(f"|V_X| = {X.n} but |S| = {S.size}")
    G = S.group
    if X.complete:
        if S.is_explicit and S.size * S.size <= _config.WALK_BUDGET:
            el = S.elements
            out = G.multiply(el[None, :], el[:, None]).reshape((-1,) + G.elem_shape)
            return GeneratorMultiset(G, out)
        h = S.histogram()
        return GeneratorMultiset(G, counts=convolve_counts(G, h, h, S.size * S.size))
    if not S.is_explicit:
        raise CapacityError("edge products over a sparse graph need an explicit multiset")
    if X.n * X.d > _config.WALK_BUDGET:
        raise CapacityError(f"{X.n * X.d} edge products above the explicit budget")
    el = S.elements
    # canonical order: vertex-major, then port
    newer = el[X.nbr.reshape(-1)]
    older = np.repeat(el, X.d, axis=0)
    return GeneratorMultiset(G, G.multiply(newer, older))


@dataclass
class EmlRound:
    phase: int
    index: int
    bias_in: float
    aux_target: float
    aux_lambda: float
    aux_strategy: str
    aux_degree: int
    replication: int
    pad: int
    bias_prepared: float
    size: int
    bias_out: float
    bound: float

    @property
    def recurrence_ok(self):
        """Phase-2 audit lambda_i <= 2 lambda_(i-1)^2 (phase 1 audits the EML bound)."""
        if self.phase == 2:
            return self.bias_out <= 2 * self.bias_prepared**2 + 1e-12
        return self.bias_out <= self.bound + 1e-12


@dataclass
class EmlAmplifyReport:
    lambda0: float
    target: float
    eps0: float = 0.0
    gamma0: float = 0.0
    phase1_limit: int = 0
    phase2_limit: int = 0
    rounds: list = field(default_factory=list)
    size_in: int = 0
    size_out: int = 0
    bias_out: float = 1.0

    @property
    def recurrence_ok(self):
        return all(r.recurrence_ok for r in self.rounds)

    @property
    def log2_size_ratio(self):
        return math.log2(self.size_out) - math.log2(self.size_in)

    def size_allowance(self):
        """log2 of (1/lambda)^4 (1/|log2 lambda|)^(log2 9) up to the phase-1 factor."""
        L = -math.log2(self.target)
        return 4 * L - math.log2(9) * math.log2(max(L, 1.0))


def phase1_repetitions(lambda0):
    """ceil(log_(1 - gamma0)(1 / (4 lambda0))) with gamma0 = (1 - lambda0)/2."""
    if lambda0 <= 0.25:
        return 0
    gamma0 = (1 - lambda0) / 2
    return math.ceil(math.log(1 / (4 * lambda0)) / math.log(1 - gamma0))


def phase2_rounds(lam):
    L = -math.log2(lam)
    if L <= 2:
        return 0
    return math.ceil(math.log2(L))


def _round(S, bias_in, aux_target, provider, phase, index):
    aux = provider(S.size, aux_target)
    Sp = aux.prepare(S) if (aux.replication != 1 or aux.pad) else S
    bias_p = bias_exact(Sp) if Sp is not S else bias_in
    out = eml_square(Sp, aux.graph)
    measured = bias_exact(out)
    rnd = EmlRound(phase, index, bias_in, aux_target, aux.lam, aux.strategy, aux.graph.d,
                   aux.replication, aux.pad, bias_p, out.size, measured, bias_p**2 + aux.lam)
    return out, rnd


def iterated_eml_amplify(S, lam, provider=None):
    """Phase 1 squares along a fixed-quality auxiliary graph down to bias 1/4; phase 2
    squares along graphs with lambda(X_(i-1)) <= lambda_(i-1)^2 until the target."""
    from .walks import _default_provider

    check_multiset(S, symmetric=True)
    lam = check_unit_interval(lam, "lambda")
    provider = _default_provider() if provider is None else provider
    lam0 = bias_exact(S)
    if lam0 >= 1 - 1e-12:
        raise PreconditionError(f"initial bias {lam0} is not below 1")
    rep = EmlAmplifyReport(lam0, lam, size_in=S.size)
    cur, cur_bias = S, lam0
    if cur_bias > lam and cur_bias > 0.25:
        rep.eps0 = lam0 * (1 - lam0) / 2
        rep.gamma0 = (1 - lam0) / 2
        rep.phase1_limit = phase1_repetitions(lam0)
        for i in range(rep.phase1_limit):
            cur, rnd = _round(cur, cur_bias, rep.eps0 * lam0, provider, 1, i)
            rep.rounds.append(rnd)
            cur_bias = rnd.bias_out
            if cur_bias <= 0.25 or cur_bias <= lam:
                break
        if cur_bias > 0.25 and cur_bias > lam:
            raise CertificationError(f"phase 1 ended at bias {cur_bias} > 1/4")
    rep.phase2_limit = phase2_rounds(lam)
    i = 0
    while cur_bias > lam:
        if i >= rep.phase2_limit + 2:
            raise CertificationError(f"phase 2 did not reach {lam} (bias {cur_bias})")
        cur, rnd = _round(cur, cur_bias, cur_bias**2, provider, 2, i)
        rep.rounds.append(rnd)
        cur_bias = rnd.bias_out
        i += 1
    rep.size_out, rep.bias_out = cur.size, cur_bias
    return cur, rep
