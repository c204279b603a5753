"""Parameter selection for the s-wide construction in log space, and the desk-scale pipeline.

Powers of two keep their base-2 logs as exact integers; every other logarithm is
an mpmath interval at 128 bits, so each inequality below is decided on a rigorous
enclosure.  A check whose enclosure straddles the threshold reports False.
"""
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from mpmath import iv

from . import _config
from ._errors import CapacityError, CertificationError, DomainError, PreconditionError
from ._validation import check_multiset, check_natural, check_positive
from .groups import GeneratorMultiset, XorBits, bias_exact

PRECISION = 128
REGIME_MIN_S = 1 << 10
SMALL_S_CHOICES = (8, 16, 32)
SIZE_CONSTANT = 2


def _iv(x):
    iv.prec = PRECISION
    if isinstance(x, Fraction):
        return iv.mpf(x.numerator) / x.denominator
    if hasattr(x, "a") and hasattr(x, "b"):
        return x
    return iv.mpf(x)


def _log2(x):
    iv.prec = PRECISION
    return iv.log(_iv(x)) / iv.log(iv.mpf(2))


def _upper(x):
    return _iv(x).b


def _lower(x):
    return _iv(x).a


def _le(a, b):
    """Rigorous a <= b on interval enclosures."""
    return bool(_upper(a) <= _lower(b))


def parse_lambda(text):
    """Target bias from text: a real in (0, 1), or "2^-N" kept as an exact log."""
    s = str(text).strip().replace(" ", "")
    if s.startswith("2^-") or s.startswith("2**-"):
        exp = s.split("-", 1)[1]
        try:
            val = Fraction(exp)
        except (ValueError, ZeroDivisionError):
            raise DomainError(f"cannot parse exponent in {text!r}") from None
        if val <= 0:
            raise DomainError("2^-N needs N > 0")
        return TargetBias(val, text=f"2^-{val}")
    try:
        x = iv.mpf(s) if s else None
    except (ValueError, TypeError):
        x = None
    if x is None:
        raise DomainError(f"cannot parse lambda {text!r}")
    if not (x.a > 0 and x.b < 1):
        raise DomainError(f"lambda must lie in (0, 1), got {text}")
    try:
        value = float(s)
    except ValueError:
        value = None
    if value is not None and not 0 < value < 1:
        value = None
    return TargetBias(-_log2(x), text=s, value=value)


@dataclass(frozen=True)
class TargetBias:
    """lambda = 2^(-log2_inv), with log2_inv exact (Fraction) or an interval."""

    log2_inv: object
    text: str = ""
    value: float = None

    @classmethod
    def of(cls, lam):
        if isinstance(lam, TargetBias):
            return lam
        if isinstance(lam, str):
            return parse_lambda(lam)
        return parse_lambda(repr(float(lam)))

    @property
    def exact(self):
        return isinstance(self.log2_inv, (int, Fraction))

    @property
    def log2_interval(self):
        return _iv(self.log2_inv)

    def as_float(self):
        """lambda itself when representable, else 0.0 (underflow)."""
        if self.value is not None:
            return self.value
        return float(2.0 ** (-float(_iv(self.log2_inv).mid))) if _upper(self.log2_inv) < 1000 else 0.0

    def describe(self):
        if self.text:
            return self.text
        return f"2^-{self.log2_inv}"


def _interval_text(x):
    x = _iv(x)
    if x.a == x.b:
        return str(iv.mpf(x.a))
    mid = (x.a + x.b) / 2
    return f"{iv.nstr(iv.mpf(mid), 30)}"


@dataclass
class Plan:
    mode: str
    s: int
    alpha: Fraction
    beta: Fraction
    size_s: int
    target: TargetBias
    log2_s: int
    log2_d2: object
    log2_n2: object
    b2: object
    log2_b2: object
    log2_inv_lambda2: object
    log2_d1: object
    log2_inv_lambda1: object
    exponent: Fraction
    t: int
    t_exact: bool
    log2_n: object = None
    log2_n_prime: object = None
    window: tuple = field(default=())

    @property
    def log2_walks(self):
        """log2 |W| = log2 n' + s log2 d1 + (t - 1) log2 d2."""
        return _iv(self.log2_n_prime) + self.s * _iv(self.log2_d1) + (self.t - 1) * _iv(self.log2_d2)

    def lines(self):
        rows = [
            ("mode", self.mode, "planner mode"),
            ("s", self.s, "smallest admissible power of two"),
            ("alpha", str(self.alpha), "1/s"),
            ("beta", str(self.beta), "degree exponent slack"),
            ("log2_inv_lambda", _interval_text(self.target.log2_inv), "target"),
            ("log2_s", self.log2_s, "exact"),
            ("log2_d2", _interval_text(self.log2_d2), "d2 = s^(4s)"),
            ("log2_n2", _interval_text(self.log2_n2), "n2 = d2^(5s)"),
            ("b2", _interval_text(self.b2), "b2 = 5s log2 d2"),
            ("log2_b2", _interval_text(self.log2_b2), "interval"),
            ("log2_inv_lambda2", _interval_text(self.log2_inv_lambda2), "lambda2 <= b2/sqrt(d2)"),
            ("log2_d1", _interval_text(self.log2_d1), "d1 = d2^5"),
            ("log2_inv_lambda1", _interval_text(self.log2_inv_lambda1), "lambda1 = lambda2^2/10"),
            ("exponent", str(self.exponent), "(1-5 alpha)(1-alpha)"),
            ("t", self.t, "minimal t" if self.t_exact else "upper end of an ambiguous ceiling"),
        ]
        if self.log2_n_prime is not None:
            rows.append(("log2_n", _interval_text(self.log2_n), "n = 2|S| d2^5"))
            rows.append(("log2_n_prime", _interval_text(self.log2_n_prime), "upper bound on the SL2 vertex count"))
            rows.append(("log2_walks", _interval_text(self.log2_walks), "log2 n' + s log2 d1 + (t-1) log2 d2"))
        return rows


def regime_window_upper(log2_inv_lambda):
    """(log(1/lam) / (4 log log(1/lam)))^(1/3), base-2 logs, as an interval."""
    L = _iv(log2_inv_lambda)
    if _upper(L) <= 2:
        return iv.mpf(0)
    return (L / (4 * _log2(L))) ** (iv.mpf(1) / 3)


def minimal_regime_log2_inv_lambda(s):
    """Smallest integer N with s^3 <= N / (4 log2 N): the least 2^-N whose window admits s."""
    s = check_natural(s, "s", 1)
    target = s**3

    def ok(N):
        return _le(iv.mpf(target), iv.mpf(N) / (4 * _log2(iv.mpf(N))))

    hi = 4
    while not ok(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _ceil_interval(q):
    """Ceiling of the upper end, and whether the whole enclosure shares it."""
    lo, hi = _ceil_mpf(q.a), _ceil_mpf(q.b)
    return hi, lo == hi


def _ceil_mpf(x):
    from mpmath import mp, mpf, ceil

    old = mp.prec
    mp.prec = PRECISION
    try:
        return int(ceil(mpf(x)))
    finally:
        mp.prec = old


def _t_from(target, exponent, log2_inv_lambda2):
    if exponent <= 0:
        raise DomainError(f"exponent (1-5 alpha)(1-alpha) = {exponent} is not positive; the t formula needs s >= 8")
    q = _iv(target.log2_inv) / (_iv(exponent) * _iv(log2_inv_lambda2))
    t_minus_1, exact = _ceil_interval(q)
    return max(1, t_minus_1) + 1, exact


def _sl2_vertex_log2_upper(log2_n):
    """log2 of an upper bound on (p^2 - 1) p for the prime p >= ceil(n^(1/3)) + 1
    found within (p - c)^3 <= 64 c^2, i.e. p <= c + 4 c^(2/3)."""
    c = iv.mpf(2) ** (_iv(log2_n) / 3) + 2
    p = c + 4 * c ** (iv.mpf(2) / 3)
    return 3 * _log2(p)


def make_plan(lam, beta, size_s, mode="regime", *, lambda2=None):
    """Log-space parameters for the s-wide amplification.

    ``mode`` is "regime" or ("small-s", s).  ``lam`` may be a float, a string such
    as "1e-300" or "2^-1000000", or a TargetBias.  In small-s mode ``lambda2`` may
    fix the inner graph's bias; otherwise the box value b2/sqrt(d2) is used.
    """
    beta_f = check_positive(beta, "beta")
    beta_q = Fraction(beta).limit_denominator(10**12) if not isinstance(beta, Fraction) else beta
    size_s = check_natural(size_s, "sizeS", 1)
    target = TargetBias.of(lam)
    if _lower(target.log2_inv) <= 0:
        raise DomainError("lambda must lie in (0, 1)")
    if mode == "regime":
        s = REGIME_MIN_S
        while s < 32 / beta_f:
            s *= 2
        upper = regime_window_upper(target.log2_inv)
        if not _le(iv.mpf(s), upper):
            raise PreconditionError(
                f"regime window empty: s = {s} exceeds (log(1/lambda)/(4 log log(1/lambda)))^(1/3) "
                f"~ {float(_iv(upper).mid):.4g}; lambda is effectively a constant here, use exp_walk_pipeline")
        mode_name = "regime"
        window = (s, float(_iv(upper).mid))
    else:
        try:
            kind, s = mode
        except (TypeError, ValueError):
            raise DomainError(f"mode must be 'regime' or ('small-s', s), got {mode!r}") from None
        if kind != "small-s":
            raise DomainError(f"unknown planner mode {kind!r}")
        s = check_natural(s, "s", 1)
        if s & (s - 1):
            raise DomainError(f"s must be a power of two, got {s}")
        if s < 8:
            raise DomainError(f"small-s mode requires s >= 8 (the t formula's exponent is not positive for s = {s})")
        mode_name = f"small-s({s})"
        window = ()
    alpha = Fraction(1, s)
    k = s.bit_length() - 1
    log2_d2 = 4 * s * k
    log2_n2 = 5 * s * log2_d2
    b2 = 5 * s * log2_d2
    log2_b2 = _log2(iv.mpf(b2))
    if lambda2 is not None:
        l2 = TargetBias.of(lambda2)
        log2_inv_lambda2 = _iv(l2.log2_inv)
    else:
        log2_inv_lambda2 = iv.mpf(log2_d2) / 2 - log2_b2
    log2_inv_lambda1 = 2 * log2_inv_lambda2 + _log2(iv.mpf(10))
    exponent = (1 - 5 * alpha) * (1 - alpha)
    t, t_exact = _t_from(target, exponent, log2_inv_lambda2)
    log2_n = 1 + _log2(iv.mpf(size_s)) + 5 * log2_d2
    plan = Plan(mode_name, s, alpha, beta_q, size_s, target, k, log2_d2, log2_n2, b2, log2_b2,
                log2_inv_lambda2, 5 * log2_d2, log2_inv_lambda1, exponent, t, t_exact,
                log2_n, _sl2_vertex_log2_upper(log2_n), window)
    return plan


@dataclass(frozen=True)
class TBoundCheck:
    ok_i: bool
    ok_ii: bool
    ok_t: bool
    margin_i: int
    margin_ii: float
    margin_t: float

    def __iter__(self):
        return iter((self.ok_i, self.ok_ii))

    def __getitem__(self, i):
        return (self.ok_i, self.ok_ii)[i]


def check_t_bound(plan):
    """Claim (i) t - 1 >= 2 s^2 and (ii) d2^(t-1) <= lambda^(-2(1 + 10 alpha)), plus
    the defining property lambda2^(e (t-1)) <= lambda of t itself (``ok_t``)."""
    if plan.mode != "regime":
        raise DomainError("check_t_bound needs a regime-mode plan")
    L = _iv(plan.target.log2_inv)
    tm1 = plan.t - 1
    margin_i = tm1 - 2 * plan.s * plan.s
    lhs_ii = iv.mpf(tm1) * _iv(plan.log2_d2)
    rhs_ii = 2 * (1 + 10 * _iv(plan.alpha)) * L
    lhs_t = L
    rhs_t = _iv(plan.exponent) * tm1 * _iv(plan.log2_inv_lambda2)
    return TBoundCheck(
        ok_i=margin_i >= 0,
        ok_ii=_le(lhs_ii, rhs_ii),
        ok_t=_le(lhs_t, rhs_t),
        margin_i=margin_i,
        margin_ii=float(iv.mpf(_lower(rhs_ii - lhs_ii))),
        margin_t=float(iv.mpf(_lower(rhs_t - lhs_t))),
    )


def perturb_t(plan, t):
    return replace(plan, t=int(t), t_exact=False)


@dataclass(frozen=True)
class ChainCheck:
    first: bool
    second: bool
    second_literal: bool


def check_chain(plan):
    """The proof's supporting inequalities on a regime plan.

    first:  lambda2^((1-5a)(1-a) 2 s^2) >= lambda
    second: d2^(1-2a) <= 1/lambda2^2 = d2/b2^2   (the form the later steps use)
    second_literal: d2^(1-2a) <= 1/lambda2, recorded for comparison
    """
    L = _iv(plan.target.log2_inv)
    a = _iv(plan.alpha)
    s = plan.s
    first = _le(_iv(plan.exponent) * 2 * s * s * _iv(plan.log2_inv_lambda2), L)
    lhs = (1 - 2 * a) * _iv(plan.log2_d2)
    second = _le(lhs, 2 * _iv(plan.log2_inv_lambda2))
    literal = _le(lhs, _iv(plan.log2_inv_lambda2))
    return ChainCheck(first, second, literal)


@dataclass(frozen=True)
class SizeAudit:
    log2_walks: object
    allowance: object
    ok: bool
    margin: float


def size_audit(plan, constant=SIZE_CONSTANT):
    """log2 |W| <= log2 |S| + (2 + beta) log2(1/lambda) + C."""
    W = plan.log2_walks
    allowance = _log2(iv.mpf(plan.size_s)) + (2 + _iv(plan.beta)) * _iv(plan.target.log2_inv) + constant
    return SizeAudit(W, allowance, _le(W, allowance), float(iv.mpf(_lower(allowance - W))))


def plan_report_lines(plan):
    rows = list(plan.lines())
    if plan.mode == "regime":
        chk = check_t_bound(plan)
        rows += [
            ("claim_i", chk.ok_i, f"t-1 >= 2s^2, margin {chk.margin_i}"),
            ("claim_ii", chk.ok_ii, f"d2^(t-1) <= lambda^(-2(1+10 alpha)), log2 margin {chk.margin_ii:.6g}"),
            ("t_definition", chk.ok_t, f"lambda2^(e(t-1)) <= lambda, log2 margin {chk.margin_t:.6g}"),
        ]
        ch = check_chain(plan)
        rows += [
            ("chain_first", ch.first, "lambda2^(e 2 s^2) >= lambda"),
            ("chain_second", ch.second, "d2^(1-2 alpha) <= d2/b2^2"),
        ]
        au = size_audit(plan)
        rows.append(("size_audit", au.ok, f"log2|W| <= log2|S| + (2+beta) log2(1/lambda) + {SIZE_CONSTANT}, "
                                          f"margin {au.margin:.6g}"))
    return rows


# --- desk-scale pipeline ------------------------------------------------------

@dataclass
class RamanujanReport:
    mode: str
    s: int
    lambda0: float
    target: float
    lambda_y: float = 1.0
    d2: int = 0
    boost_target: float = 0.0
    boost_bias: float = 1.0
    boost_size: int = 0
    boost_word_length: int = 1
    swide_used: bool = False
    lambda_x: float = 1.0
    precondition_margin: float = -1.0
    t_plan: int = 0
    t_used: int = 0
    bound: float = 1.0
    log2_walks: float = 0.0
    size_out: int = 0
    bias_out: float = 1.0
    word_length: int = 1
    notes: list = field(default_factory=list)


def _distribution_bias(G, w):
    if G.kind == "xor-bits":
        from .groups import walsh_hadamard

        return float(np.max(np.abs(walsh_hadamard(w)[1:]), initial=0.0))
    from .groups import cayley_operator_dense
    from .spectral import deflated_dense

    return deflated_dense(cayley_operator_dense(G, w), symmetric=False)


def inner_generators(s, b=1):
    """Generator multiset of the inner Cayley graph on Z_2^(s b): an AGHP set joined
    with the whole group, so lambda_Y is half the AGHP bias."""
    from .zoo import aghp_set

    m = s * b
    if m > 16:
        raise CapacityError(f"inner graph on Z_2^{m} above the desk budget")
    A = aghp_set(m, m // 2)
    full = np.arange(1 << m, dtype=np.int64)
    return GeneratorMultiset(XorBits(m), np.concatenate([A.elements, full]), symmetric=True)


def almost_ramanujan_pipeline(S, lam, beta=Fraction(1, 32), mode=("small-s", 8), *, provider=None,
                              max_extra_steps=None, fallback=True):
    """Boost with the walk pipeline, then (if still needed) an s-wide derandomized walk.

    Returns (S', RamanujanReport).  Only the small-s desk mode builds anything.
    """
    from .walks import exp_walk_pipeline

    check_multiset(S, symmetric=True)
    target = TargetBias.of(lam)
    lam_f = target.as_float()
    if not 0 < lam_f < 1:
        raise DomainError("desk pipeline needs a representable lambda in (0, 1)")
    if mode == "regime":
        make_plan(target, beta, S.size, "regime")
        raise CapacityError("regime-mode parameters are symbolic only; request a small-s mode")
    make_plan(target, beta, S.size, mode)
    lam0 = bias_exact(S)
    if lam0 >= 1 - 1e-12:
        raise PreconditionError(f"initial bias {lam0} is not below 1")
    s = mode[1]
    T = inner_generators(s)
    lam_y = bias_exact(T)
    plan = make_plan(target, beta, S.size, mode, lambda2=lam_y)
    rep = RamanujanReport(plan.mode, s, lam0, lam_f, t_plan=plan.t)
    if lam0 <= lam_f:
        rep.bias_out, rep.size_out = lam0, S.size
        rep.notes.append("target already met by the input")
        return S, rep
    rep.lambda_y, rep.d2 = lam_y, T.size
    rep.boost_target = lam_y**2 / 3
    cur, cur_bias = S, lam0
    if lam0 > rep.boost_target:
        cur, prep = exp_walk_pipeline(S, max(rep.boost_target, lam_f), 1.0, provider)
        cur_bias = prep.bias_out
        rep.boost_word_length = prep.word_length
    rep.boost_bias, rep.boost_size = cur_bias, cur.size
    rep.word_length = rep.boost_word_length
    if cur_bias <= lam_f:
        rep.bias_out, rep.size_out = cur_bias, cur.size
        rep.notes.append("target met by the boost stage")
        return cur, rep
    # the s-wide stage needs lambda_X ~ 0 with |V_Y| = d1^s; at desk scale that means
    # X = Cay(Z_2^b, Z_2^b) on a boosted multiset of exactly 2^b entries
    bits = cur.size.bit_length() - 1
    fits = (cur.is_explicit and cur.size == 1 << bits and bits >= 1 and bits * s <= 16
            and cur.size << (bits * s) <= _config.STATE_BUDGET // S.group.order)
    if not fits:
        if not fallback:
            raise CapacityError(f"no desk-scale outer graph for a boosted multiset of size {cur.size}")
        out, prep = exp_walk_pipeline(cur, lam_f, 1.0, provider)
        rep.word_length = rep.boost_word_length * prep.word_length
        rep.bias_out, rep.size_out = prep.bias_out, out.size
        rep.notes.append("s-wide stage skipped (capacity); walk pipeline carried to the target")
        return out, rep
    out = swide_stage(cur, lam_f, s, plan.t - 1, rep, max_extra_steps=max_extra_steps, lambda0=cur_bias)
    rep.word_length = rep.boost_word_length * (rep.t_used + 1)
    return out, rep


def swide_stage(S2, lam, s, min_steps=1, report=None, *, max_extra_steps=None, lambda0=None):
    """s-wide derandomized walk over X = Cay(Z_2^b, Z_2^b) whose 2^b vertices are S2's entries.

    Stops at the first step count >= min_steps whose bias is <= lam; the float probe
    picks it and an exact residue pass builds the counted output.
    """
    from .graphs import lambda_of
    from .groups import cayley_graph
    from .swide import SWideCountDP, SWideProduct, swide_bias_bound, swide_precondition_margin

    check_multiset(S2, explicit=True)
    bits = S2.size.bit_length() - 1
    if S2.size != 1 << bits or bits < 1:
        raise DomainError(f"outer graph needs 2^b entries with b >= 1, got {S2.size}")
    rep = RamanujanReport(f"small-s({s})", s, 1.0, lam) if report is None else report
    lam0 = bias_exact(S2) if lambda0 is None else lambda0
    T = inner_generators(s, bits)
    lam_y = bias_exact(T)
    rep.lambda_y, rep.d2 = lam_y, T.size
    X = cayley_graph(GeneratorMultiset(XorBits(bits), np.arange(1 << bits), symmetric=True))
    P = SWideProduct(X, s, T)
    G = S2.group
    if X.n * P.nY * G.order > _config.STATE_BUDGET:
        raise CapacityError(f"s-wide state space {X.n}*{P.nY}*{G.order} above budget")
    rep.swide_used = True
    rep.lambda_x = lambda_of(X).value
    rep.precondition_margin = swide_precondition_margin(lam0, rep.lambda_x, lam_y)
    probe = SWideCountDP(S2, P, track_distribution=True, exact=False)
    min_steps = max(1, int(min_steps))
    steps_cap = min_steps + (4 * min_steps + 2 * s if max_extra_steps is None else max_extra_steps)
    estimate = None
    for step in range(1, steps_cap + 1):
        probe.step()
        estimate = _distribution_bias(G, probe.distribution())
        if step >= min_steps and estimate <= lam:
            rep.t_used = step
            break
    if rep.t_used == 0:
        raise CertificationError(f"s-wide stage did not reach {lam} within {steps_cap} steps (last {estimate})")
    dp = SWideCountDP(S2, P, rep.t_used)
    for _ in range(rep.t_used):
        dp.step()
    out = GeneratorMultiset(G, counts=dp.histogram())
    measured = bias_exact(out)
    if measured > lam + 1e-12:
        raise CertificationError(f"exact bias {measured} above target {lam}")
    rep.bound = swide_bias_bound(lam_y, s, rep.t_used) if rep.precondition_margin >= 0 else 1.0
    rep.log2_walks = math.log2(X.n) + s * math.log2(X.d) + rep.t_used * math.log2(T.size)
    rep.bias_out, rep.size_out = measured, out.size
    rep.word_length = rep.t_used + 1
    if rep.precondition_margin < 0:
        rep.notes.append("outer-graph precondition fails; result certified by exact bias only")
    return out
