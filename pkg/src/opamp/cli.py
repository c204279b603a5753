"""Command-line front end: ``opamp <command> ...``.

Reports are ``key = value # anchor`` lines on stdout (and in ``--report`` when given).
Nothing time- or host-dependent goes into a report, so identical inputs give
byte-identical output.  Exit codes: 0 ok, 2 parse/domain, 3 precondition,
4 capacity/provider, 5 certification.
"""
import argparse
import json
import math
import sys
import time
from fractions import Fraction

from . import fileio
from ._errors import DomainError, OpampError
from .zoo import ExpanderProvider

TOL = 1e-9


def _fraction(text):
    try:
        val = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if val <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return val


def _lambda_float(text):
    from .planner import parse_lambda

    lam = parse_lambda(text).as_float()
    if not 0 < lam < 1:
        raise DomainError(f"lambda {text} is not representable as a positive double")
    return lam


class Report:
    def __init__(self, argv):
        self.rows = [("command", " ".join(argv), "command echo")]

    def add(self, key, value, anchor=""):
        self.rows.append((key, value, anchor))

    def digest(self, name, path):
        self.add(f"input.{name}.sha256", fileio.digest(path), path)

    def measured(self, key, value, anchor="", tol=TOL):
        self.add(key, value, f"{anchor}, tol {tol:g}" if anchor else f"tol {tol:g}")

    def bound(self, key, value, bound, anchor):
        """A bound line: the inequality, its slack and the tolerance it is checked at."""
        ok = value <= bound + TOL
        self.add(f"{key}.holds", ok, f"{anchor}, margin {bound - value:.12g}, tol {TOL:g}")
        return ok

    def text(self):
        return fileio.format_report(self.rows)

    def json(self):
        """Same keys as the text form, one object per line in report order."""
        rows = []
        for key, value, anchor in self.rows:
            if hasattr(value, "item"):
                value = value.item()
            if isinstance(value, float):
                value = round(value, 12)
            elif not isinstance(value, (bool, int, str)):
                value = str(value)
            rows.append({"key": key, "value": value, "anchor": anchor})
        return json.dumps(rows, indent=1, ensure_ascii=False) + "\n"


def _provider(args):
    return ExpanderProvider(args.provider)


# --- amplify ---------------------------------------------------------------------


def _amplify_walks(S, lam, args, rep):
    from .walks import exp_walk_pipeline

    beta = float(args.beta) if args.beta is not None else 1.0
    out, pr = exp_walk_pipeline(S, lam, beta, _provider(args))
    rep.add("beta", beta)
    rep.measured("lambda0", pr.lambda0, "bias of the input")
    rep.add("lambda_prime", pr.lambda_prime, "stage-1 constant target")
    for st in pr.stages:
        for key, val in st.lines(st.name):
            rep.add(key, val)
        rep.bound(f"{st.name}.walk_bound", st.bias_out, st.bound, "expander-walk bound at t_used")
    rep.add("word_length", pr.word_length)
    return out, pr.bias_out


def _amplify_swide(S, lam, args, rep):
    from .planner import almost_ramanujan_pipeline
    from .swide import swide_bias_bound

    beta = args.beta if args.beta is not None else Fraction(1, 32)
    mode = ("small-s", args.small_s)
    out, rr = almost_ramanujan_pipeline(S, lam, beta, mode, provider=_provider(args))
    rep.add("beta", str(beta))
    rep.add("mode", rr.mode)
    rep.measured("lambda0", rr.lambda0, "bias of the input")
    rep.measured("lambda_y", rr.lambda_y, "inner Cayley graph")
    rep.add("d2", rr.d2, "inner degree")
    rep.add("t_plan", rr.t_plan, "small-s step count")
    s = args.small_s
    per_block = swide_bias_bound(rr.lambda_y, s, s)
    if per_block < 1:
        t_bound = s * max(1, math.ceil(math.log(lam) / math.log(per_block)))
        bound = swide_bias_bound(rr.lambda_y, s, t_bound)
        rep.add("swide.t_bound", t_bound, "least multiple of s whose s-wide bound meets the target")
        rep.add("swide.bound_margin", lam - bound,
                f"target minus (lY^s + s lY^(s-1) + s^2 lY^(s-3))^(t/s) = {bound:.6g}")
    else:
        rep.add("swide.bound_margin", "n/a", "lY^s + s lY^(s-1) + s^2 lY^(s-3) >= 1")
    rep.add("boost_target", rr.boost_target, "lambda_Y^2/3")
    rep.measured("boost_bias", rr.boost_bias, "after the walk boost")
    rep.add("boost_size", rr.boost_size)
    rep.add("swide_used", rr.swide_used)
    if rr.swide_used:
        rep.measured("lambda_x", rr.lambda_x, "outer graph")
        rep.add("swide.precondition_margin", rr.precondition_margin, "lambda_Y^2 - 2 lambda_X - lambda_0")
        rep.add("t_used", rr.t_used)
        rep.add("log2_walks", rr.log2_walks, "log2 |V_X| + s log2 d1 + t log2 d2")
        if rr.precondition_margin >= 0:
            rep.bound("swide.bound", rr.bias_out, rr.bound, "s-wide product bound at t_used")
    rep.add("word_length", rr.word_length)
    for i, note in enumerate(rr.notes):
        rep.add(f"note{i}", note)
    return out, rr.bias_out


def _amplify_eml(S, lam, args, rep):
    from .eml import iterated_eml_amplify

    out, er = iterated_eml_amplify(S, lam, _provider(args))
    rep.measured("lambda0", er.lambda0, "bias of the input")
    rep.add("eps0", er.eps0, "lambda0 (1 - lambda0)/2")
    rep.add("gamma0", er.gamma0, "(1 - lambda0)/2")
    rep.add("phase1_limit", er.phase1_limit)
    rep.add("phase2_limit", er.phase2_limit)
    for i, r in enumerate(er.rounds):
        p = f"round{i}"
        rep.add(f"{p}.phase", r.phase)
        rep.add(f"{p}.aux_target", r.aux_target)
        rep.measured(f"{p}.aux_lambda", r.aux_lambda, r.aux_strategy)
        rep.add(f"{p}.aux_degree", r.aux_degree)
        rep.measured(f"{p}.bias_prepared", r.bias_prepared)
        rep.add(f"{p}.size", r.size)
        rep.measured(f"{p}.bias_out", r.bias_out)
        if r.phase == 2:
            rep.bound(f"{p}.recurrence", r.bias_out, 2 * r.bias_prepared**2, "lambda_i <= 2 lambda_(i-1)^2")
        else:
            rep.bound(f"{p}.eml", r.bias_out, r.bound, "bias^2 + lambda(X) mixing bound")
    rep.add("log2_size_ratio", er.log2_size_ratio)
    return out, er.bias_out


def cmd_amplify(args, rep):
    S = fileio.read_generators(args.inp)
    rep.digest("in", args.inp)
    lam = _lambda_float(args.lam)
    rep.add("method", args.method)
    rep.add("target", lam)
    rep.add("size_in", S.size)
    run = {"walks": _amplify_walks, "swide": _amplify_swide, "eml": _amplify_eml}[args.method]
    out, bias = run(S, lam, args, rep)
    rep.add("size_out", out.size)
    rep.measured("bias_out", bias, "certified bias of the output")
    ok = rep.bound("target", bias, lam, "bias_out <= target")
    if args.out:
        fileio.write_generators(args.out, out)
    return 0 if ok else 5


# --- transform ---------------------------------------------------------------------


def cmd_transform(args, rep):
    from .permutations import transform_graph

    g = fileio.read_graph(args.inp)
    rep.digest("in", args.inp)
    lam = _lambda_float(args.lam)
    out, tr = transform_graph(g, lam, engine=args.engine, provider=_provider(args),
                              audit_samples=args.audit_samples, seed=args.seed)
    rep.add("engine", args.engine)
    rep.add("target", lam)
    rep.measured("lambda0", tr.lambda0, "base graph")
    rep.add("degree_in", tr.degree_in)
    rep.add("degree_out", tr.degree_out, "permutations and their inverses")
    if tr.amp is not None:
        for key, val in tr.amp.lines():
            if key not in ("lambda0", "target"):
                rep.add(f"amp.{key}", val)
    rep.add("locality.walk_length", tr.walk_length, "longest replayed base walk")
    rep.add("locality.audited_edges", tr.audited_edges, f"sampled with seed {args.seed}")
    rep.measured("lambda_out", tr.lambda_out, "output graph")
    ok = rep.bound("target", tr.lambda_out, lam, "lambda_out <= target")
    if args.out:
        fileio.write_graph(args.out, out)
    return 0 if ok else 5


# --- verify ------------------------------------------------------------------------


def cmd_verify(args, rep):
    from .graphs import lambda_of
    from .groups import bias_report

    if not (args.graph or args.gens):
        raise DomainError("verify needs --graph and/or --gens")
    g = None
    if args.graph:
        g = fileio.read_graph(args.graph)
        rep.digest("graph", args.graph)
        sr = lambda_of(g, args.tol, seed=args.seed)
        rep.add("graph.n", g.n)
        rep.add("graph.d", g.d)
        rep.add("graph.mode", "singular-value" if g.directed else "eigenvalue",
                "directed graphs use the deflated top singular value")
        rep.add("graph.method", sr.method)
        rep.measured("graph.lambda", sr.value, "max nontrivial |eigenvalue|", args.tol)
        if sr.residual:
            rep.add("graph.residual", sr.residual)
    if args.gens:
        S = fileio.read_generators(args.gens)
        rep.digest("gens", args.gens)
        br = bias_report(S, args.tol, seed=args.seed)
        rep.add("gens.group", S.group.header())
        rep.add("gens.size", S.size)
        rep.add("gens.mode", "eigenvalue" if S.symmetric else "singular-value",
                "symmetric multiset" if S.symmetric else "not inverse-closed: directed Cayley graph")
        rep.add("gens.method", br.method)
        rep.measured("gens.bias", br.value, "lambda of the Cayley graph", args.tol)
    if args.operator:
        from .eml import eml_defect
        from .operators import two_step_norm_check

        if g is None:
            raise DomainError("--operator needs --graph")
        f = fileio.read_operator(args.operator)
        rep.digest("operator", args.operator)
        er = eml_defect(f, g)
        rep.add("operator.n", f.n)
        rep.add("operator.ell", f.ell)
        rep.measured("operator.eml_defect", er.defect, "edge average minus squared mean")
        rep.bound("operator.eml", er.defect, er.bound, "defect <= lambda(X) max ||f||^2")
        measured, b_const, b_any = two_step_norm_check(f, g, er.lambda_x)
        rep.measured("operator.two_step_norm", measured)
        rep.bound("operator.two_step", measured, min(1.0, b_const, b_any), "two-step walk norm bound")
    return 0


# --- plan --------------------------------------------------------------------------


def cmd_plan(args, rep):
    from .planner import (check_chain, check_t_bound, make_plan, minimal_regime_log2_inv_lambda,
                          plan_report_lines, size_audit)

    if args.regime == (args.small_s is not None):
        raise DomainError("choose exactly one of --regime or --small-s")
    given = [x is not None for x in (args.lam, args.log2_inv_lambda, args.s)]
    if sum(given) != 1:
        raise DomainError("give exactly one of --lambda, --log2-inv-lambda or --s")
    if args.s is not None:
        if not args.regime:
            raise DomainError("--s picks the least regime target; it needs --regime")
        lam = f"2^-{minimal_regime_log2_inv_lambda(args.s)}"
        rep.add("derived_target", lam, "least 2^-N whose regime window admits s")
    elif args.log2_inv_lambda is not None:
        lam = f"2^-{args.log2_inv_lambda}"
    else:
        lam = args.lam
    mode = "regime" if args.regime else ("small-s", args.small_s)
    plan = make_plan(lam, args.beta, args.size, mode, lambda2=args.lambda2)
    if args.s is not None and plan.s != args.s:
        raise DomainError(f"--beta {args.beta} forces s = {plan.s}, not {args.s}")
    for key, val, anchor in plan_report_lines(plan):
        rep.add(key, val, anchor)
    if plan.mode == "regime":
        chk = check_t_bound(plan)
        ch = check_chain(plan)
        au = size_audit(plan)
        rep.add("chain_second_literal", ch.second_literal, "d2^(1-2 alpha) <= 1/lambda2 as printed")
        ok = chk.ok_i and chk.ok_ii and chk.ok_t and ch.first and ch.second and au.ok
        rep.add("all_checks", ok)
        return 0 if ok else 5
    return 0


# --- zoo ---------------------------------------------------------------------------


def cmd_zoo(args, rep):
    from .groups import bias_report, cayley_graph
    from .zoo import aghp_set, find_prime_in_range, sl2_generators, small_cayley_expander

    if args.family == "aghp":
        A = aghp_set(args.m, args.k)
        S = A.multiset
        rep.add("family", f"aghp m={args.m} k={args.k}")
        rep.add("d", A.d)
        rep.measured("bias", A.bias(), "exhaustive characters")
        rep.bound("aghp", A.bias(), A.bound, "bias <= m/sqrt(d)")
        g = None
    elif args.family == "sl2":
        p = find_prime_in_range(args.p)
        if p != args.p:
            raise DomainError(f"p = {args.p} is not prime (next prime {p})")
        S = sl2_generators(p)
        rep.add("family", f"sl2 p={p}")
        rep.add("order", S.group.order)
        br = bias_report(S, TOL, seed=args.seed)
        rep.measured("bias", br.value, br.method)
        g = None
    else:
        lam = _lambda_float(args.lam)
        g, S, n_prime = small_cayley_expander(args.n, lam, graph=args.graph_out is not None)
        rep.add("family", f"small n={args.n}")
        rep.add("target", lam)
        rep.add("vertices", n_prime, "|SL2(p)| >= n")
        rep.add("degree", S.size)
        br = bias_report(S, TOL, seed=args.seed)
        rep.measured("bias", br.value, br.method)
        rep.bound("target", br.value, lam, "bias <= target")
    if args.out:
        fileio.write_generators(args.out, S)
    if args.graph_out:
        fileio.write_graph(args.graph_out, g if g is not None else cayley_graph(S.materialize()))
    return 0


# --- s-wide ------------------------------------------------------------------------


def cmd_swide(args, rep):
    from .graphs import lambda_of
    from .groups import bias_exact
    from .swide import SWideProduct, derandomized_product, swide_bias_bound, swide_precondition_margin

    if args.spec:
        spec = fileio.read_swide_spec(args.spec)
        rep.digest("spec", args.spec)
        x_path, y_path, s, t = spec["x"], spec["y"], spec["s"], spec["t"]
    else:
        if None in (args.x, args.y, args.s, args.t):
            raise DomainError("swide run needs --spec or all of --x, --y, --s, --t")
        x_path, y_path, s, t = args.x, args.y, args.s, args.t
    X = fileio.read_graph(x_path)
    rep.digest("x", x_path)
    T = fileio.read_generators(y_path)
    rep.digest("y", y_path)
    P = SWideProduct(X, s, T)
    lam_x = lambda_of(X, TOL, seed=args.seed).value
    lam_y = bias_exact(T, TOL, seed=args.seed)
    rep.add("s", s)
    rep.add("t", t)
    rep.add("d1", P.d1)
    rep.add("d2", P.d2)
    rep.add("walk_count", P.walk_count(t), "|V_X| d1^s d2^t")
    rep.measured("lambda_x", lam_x, "outer graph")
    rep.measured("lambda_y", lam_y, "inner Cayley graph")
    rep.add("bound", swide_bias_bound(lam_y, s, t), "(lY^s + s lY^(s-1) + s^2 lY^(s-3))^floor(t/s)")
    if args.inp:
        S = fileio.read_generators(args.inp)
        rep.digest("in", args.inp)
        lam0 = bias_exact(S, TOL, seed=args.seed)
        out = derandomized_product(S, P, t)
        bias = bias_exact(out, TOL, seed=args.seed)
        margin = swide_precondition_margin(lam0, lam_x, lam_y)
        rep.measured("lambda0", lam0, "bias of the input")
        rep.add("precondition_margin", margin, "lambda_Y^2 - 2 lambda_X - lambda_0")
        rep.add("size_out", out.size)
        rep.measured("bias_out", bias, "derandomized product")
        ok = True
        if margin >= 0:
            ok = rep.bound("swide.bound", bias, swide_bias_bound(lam_y, s, t), "s-wide product bound")
        if args.out:
            fileio.write_generators(args.out, out)
        return 0 if ok else 5
    return 0


# --- parser ------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="opamp", description="Operator-valued bias amplification for expanders.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--report", help="also write the report to this file")
    common.add_argument("--seed", type=int, default=0, help="seed for every randomized verification path")
    common.add_argument("--timing", action="store_true", help="print wall time to stderr")
    common.add_argument("--format", choices=["text", "json"], default="text", dest="report_format",
                        help="report layout; json mirrors the text keys")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("amplify", parents=[common], help="amplify a generator multiset")
    a.add_argument("--in", dest="inp", required=True)
    a.add_argument("--lambda", dest="lam", required=True)
    a.add_argument("--method", choices=("walks", "swide", "eml"), default="walks")
    a.add_argument("--beta", type=_fraction)
    a.add_argument("--small-s", type=int, default=8)
    a.add_argument("--provider", choices=("auto", "aghp-pad", "complete", "sl2"), default="auto")
    a.add_argument("--out")
    a.set_defaults(func=cmd_amplify)

    t = sub.add_parser("transform", parents=[common], help="amplify a regular graph, keeping its vertices")
    t.add_argument("--in", dest="inp", required=True)
    t.add_argument("--lambda", dest="lam", required=True)
    t.add_argument("--engine", choices=("walks", "swide", "eml"), default="walks")
    t.add_argument("--provider", choices=("auto", "aghp-pad", "complete", "sl2"), default="auto")
    t.add_argument("--audit-samples", type=int, default=64)
    t.add_argument("--out")
    t.set_defaults(func=cmd_transform)

    v = sub.add_parser("verify", parents=[common], help="certify lambda of a graph and/or bias of a multiset")
    v.add_argument("--graph")
    v.add_argument("--gens")
    v.add_argument("--operator", help="operator function file checked against --graph")
    v.add_argument("--tol", type=float, default=TOL)
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plan", parents=[common], help="log-space parameter plan")
    pl.add_argument("--lambda", dest="lam")
    pl.add_argument("--log2-inv-lambda", type=_fraction)
    pl.add_argument("--s", type=int, help="regime s; the target becomes the least one admitting it")
    pl.add_argument("--beta", type=_fraction, default=Fraction(1, 32))
    pl.add_argument("--regime", action="store_true")
    pl.add_argument("--small-s", type=int)
    pl.add_argument("--lambda2", help="inner bias for small-s plans")
    pl.add_argument("--size", type=int, default=2, help="|S| of the input multiset")
    pl.set_defaults(func=cmd_plan)

    z = sub.add_parser("zoo", help="explicit expander families")
    zs = z.add_subparsers(dest="family", required=True)
    za = zs.add_parser("aghp", parents=[common])
    za.add_argument("--m", type=int, required=True)
    za.add_argument("--k", type=int, required=True)
    zl = zs.add_parser("sl2", parents=[common])
    zl.add_argument("--p", type=int, required=True)
    zm = zs.add_parser("small", parents=[common])
    zm.add_argument("--n", type=int, required=True)
    zm.add_argument("--lambda", dest="lam", required=True)
    for zp in (za, zl, zm):
        zp.add_argument("--out", help="generator file")
        zp.add_argument("--graph-out", help="Cayley graph as a rotation-map file")
        zp.set_defaults(func=cmd_zoo)

    s = sub.add_parser("swide", help="s-wide replacement product")
    ss = s.add_subparsers(dest="action", required=True)
    sr = ss.add_parser("run", parents=[common])
    sr.add_argument("--spec")
    sr.add_argument("--x")
    sr.add_argument("--y")
    sr.add_argument("--s", type=int)
    sr.add_argument("--t", type=int)
    sr.add_argument("--in", dest="inp", help="multiset labelling the vertices of X")
    sr.add_argument("--out")
    sr.set_defaults(func=cmd_swide)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    rep = Report(["opamp"] + argv)
    start = time.perf_counter()
    try:
        code = args.func(args, rep)
    except OpampError as exc:
        print(f"error = {exc} # {type(exc).__name__}, exit {exc.exit_code}", file=sys.stderr)
        return exc.exit_code
    except (OverflowError, ZeroDivisionError) as exc:
        print(f"error = {exc} # numeric domain, exit 2", file=sys.stderr)
        return 2
    rep.add("status", "ok" if code == 0 else "certification miss", f"exit {code}")
    text = rep.json() if args.report_format == "json" else rep.text()
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.timing:
        print(f"wall_time = {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
