import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opamp._errors import DomainError, PreconditionError
from opamp.graphs import complete_graph_with_loops, cycle_graph, lambda_of, random_regular_graph
from opamp.groups import GeneratorMultiset, Symmetric, XorBits, bias_exact, cayley_graph
from opamp.walks import (
    amplify_via_walks, enumerate_walks, exp_walk_pipeline, simple_amplification_steps, walk_bias_bound,
)
from opamp.zoo import ExpanderProvider, aghp_set

from oracles import character_bias_bruteforce, character_bias_weighted


def brute_products(S, X, t):
    """Explicit newest-first products over every walk, by plain recursion."""
    el = [int(v) for v in S.elements]
    out = []

    def rec(path):
        if len(path) == t + 1:
            acc = 0
            for x in path:
                acc ^= el[x]
            out.append(acc)
            return
        for i in range(X.d):
            rec(path + [int(X.nbr[path[-1], i])])

    for x0 in range(X.n):
        rec([x0])
    return out


def test_walk_counts():
    assert len(enumerate_walks(cycle_graph(3), 1)) == 6
    assert len(enumerate_walks(cycle_graph(4), 2)) == 16
    W = enumerate_walks(cycle_graph(4), 0)
    assert W.walks().tolist() == [[0], [1], [2], [3]]


def test_walks_follow_edges():
    g = random_regular_graph(20, 3, seed=4)
    W = enumerate_walks(g, 3)
    walks = W.walks()
    assert len(walks) == 20 * 27
    for w in walks[::7]:
        for a, b in zip(w[:-1], w[1:]):
            assert b in g.nbr[a]


def test_streaming_mode_downgrade():
    W = enumerate_walks(cycle_graph(4), 3, budget=10)
    assert W.mode == "streaming"
    assert W.fold(lambda acc, block: acc + len(block), 0) == 32


def test_complete_aux_graph_cubes_bias():
    S = GeneratorMultiset(XorBits(2), [1, 2, 3])
    Sp = amplify_via_walks(S, complete_graph_with_loops(3), 2)
    assert Sp.size == 27
    assert bias_exact(Sp) == pytest.approx(1 / 27)
    assert character_bias_bruteforce(Sp.elements, 2) == pytest.approx(1 / 27)


def test_t0_returns_input():
    S = GeneratorMultiset(XorBits(2), [1, 2, 3])
    assert amplify_via_walks(S, complete_graph_with_loops(3), 0) is S


def test_size_mismatch():
    with pytest.raises(DomainError):
        amplify_via_walks(GeneratorMultiset(XorBits(2), [1, 2, 3]), cycle_graph(4), 1)


def test_explicit_and_counted_forms_agree_with_bruteforce():
    rng = np.random.default_rng(0)
    S = GeneratorMultiset(XorBits(4), rng.integers(0, 16, size=8))
    X = random_regular_graph(8, 3, seed=1)
    brute = brute_products(S, X, 3)
    explicit = amplify_via_walks(S, X, 3, form="explicit")
    counted = amplify_via_walks(S, X, 3, form="counted")
    assert explicit.elements.tolist() == brute
    assert counted.same_multiset(explicit)


def test_non_abelian_products_are_newest_first():
    G = Symmetric(3)
    S = GeneratorMultiset(G, [[1, 0, 2], [0, 2, 1], [1, 2, 0], [2, 0, 1]])
    X = random_regular_graph(4, 2, seed=3)
    Sp = amplify_via_walks(S, X, 2, form="explicit")
    W = enumerate_walks(X, 2).walks()
    for walk, got in zip(W, Sp.elements):
        acc = np.arange(3)
        for x in walk:
            acc = S.elements[x][acc]
        assert got.tolist() == acc.tolist()
    assert amplify_via_walks(S, X, 2, form="counted").same_multiset(Sp)


def test_aghp_walks_meet_constant_bound():
    rng = np.random.default_rng(12)
    A = aghp_set(10, 5)
    lam_x = A.bias()
    # 1024 entries of Z_2^4 skewed toward the identity
    el = rng.integers(0, 16, size=1024)
    el[:200] = 0
    S = GeneratorMultiset(XorBits(4), el)
    lam0 = bias_exact(S)
    assert 2 * lam_x + lam0 < 1
    Sp = amplify_via_walks(S, cayley_graph(A.multiset), 4)
    assert bias_exact(Sp) <= (2 * lam_x + lam0) ** 2 + 1e-9
    assert bias_exact(Sp) == pytest.approx(character_bias_weighted(Sp.distribution(), 4), abs=1e-12)


def test_walk_bias_bound_examples():
    assert walk_bias_bound(0.1, 0.5, 4, "constant") == pytest.approx(0.49)
    assert walk_bias_bound(0.1, 0.5, 4, "any-bias") == pytest.approx(0.595**2)
    assert walk_bias_bound(0.3, 1.0, 7, "any-bias") == 1.0
    with pytest.raises(DomainError):
        walk_bias_bound(0.1, 0.5, 4, "other")


def test_step_formula_example():
    assert simple_amplification_steps(0.5, 0.1) == math.ceil(2 * (1 + math.log2(10))) == 9


def test_pipeline_target_equal_to_bias_is_noop():
    S = GeneratorMultiset(XorBits(2), [1, 2, 3])
    Sp, rep = exp_walk_pipeline(S, 1 / 3 + 1e-12)
    assert Sp is S and not rep.stages


def test_pipeline_z2_6():
    rng = np.random.default_rng(5)
    S = GeneratorMultiset(XorBits(6), rng.integers(0, 64, size=40))
    lam0 = bias_exact(S)
    assert lam0 <= 0.5
    Sp, rep = exp_walk_pipeline(S, 0.05, provider=ExpanderProvider("auto"))
    assert bias_exact(Sp) <= 0.05
    assert rep.size_out == Sp.size and Sp.size / S.size < math.inf
    for st in rep.stages:
        assert st.aux_lambda <= st.eps0 * st.bias_in + 1e-12


def test_pipeline_precondition():
    S = GeneratorMultiset(XorBits(3), [1, 2, 4])
    with pytest.raises(PreconditionError):
        exp_walk_pipeline(S, 0.1)
    with pytest.raises(DomainError):
        exp_walk_pipeline(GeneratorMultiset(XorBits(2), [1, 2, 3]), 1.5)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(2, 5), t=st.integers(0, 4), seed=st.integers(0, 10**6))
def test_amplified_bias_within_both_bounds(m, t, seed):
    rng = np.random.default_rng(seed)
    n = 8
    S = GeneratorMultiset(XorBits(m), rng.integers(0, 1 << m, size=n))
    X = random_regular_graph(n, 3, seed)
    lam0 = bias_exact(S)
    lam_x = lambda_of(X).value
    got = bias_exact(amplify_via_walks(S, X, t))
    assert got <= walk_bias_bound(min(lam_x, 1), lam0, t, "any-bias") + 1e-9
    const = walk_bias_bound(min(lam_x, 1), lam0, t, "constant")
    if const < 1:
        assert got <= const + 1e-9
