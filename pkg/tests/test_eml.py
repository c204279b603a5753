import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opamp._errors import DomainError, PreconditionError
from opamp.eml import eml_defect, eml_square, iterated_eml_amplify, phase1_repetitions, phase2_rounds
from opamp.graphs import complete_graph, complete_graph_with_loops, cycle_graph, lambda_of, random_regular_graph
from opamp.groups import GeneratorMultiset, XorBits, bias_exact, cayley_graph
from opamp.operators import OperatorFunction, random_unitaries
from opamp.zoo import ExpanderProvider, aghp_set

from oracles import character_bias_bruteforce, graph_lambda_full_spectrum


def edge_defect_bruteforce(f, X):
    """Operator norm of E over ordered edges of f(y) f(x) minus the squared mean, by a plain loop."""
    total = np.zeros((f.ell, f.ell), dtype=complex)
    for x in range(X.n):
        for i in range(X.d):
            total += f.mats[X.nbr[x, i]] @ f.mats[x]
    total /= X.n * X.d
    mean = f.mats.mean(axis=0)
    return np.linalg.norm(total - mean @ mean, 2)


@pytest.mark.parametrize("n", [4, 5, 8])
def test_complete_graph_sign_function(n):
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    f = OperatorFunction(signs[:, None, None])
    X = complete_graph(n)
    rep = eml_defect(f, X)
    assert rep.lambda_x == pytest.approx(1 / (n - 1))
    assert rep.defect <= 1 / (n - 1) + 1e-12
    assert rep.defect == pytest.approx(edge_defect_bruteforce(f, X), abs=1e-12)


def test_constant_function_has_zero_defect():
    U = random_unitaries(1, 3, seed=2).mats[0]
    f = OperatorFunction(np.broadcast_to(U, (6, 3, 3)))
    rep = eml_defect(f, cycle_graph(6))
    assert rep.defect == pytest.approx(0.0, abs=1e-12)


def test_complete_with_loops_is_exact():
    f = random_unitaries(5, 2, seed=1)
    rep = eml_defect(f, complete_graph_with_loops(5))
    assert rep.defect == pytest.approx(0.0, abs=1e-12) and rep.bound == 0.0


def test_random_unitary_over_aghp_graph():
    A = aghp_set(8, 4)
    X = cayley_graph(A.multiset)
    f = random_unitaries(X.n, 2, seed=9)
    rep = eml_defect(f, X)
    assert rep.defect <= rep.lambda_x + 1e-9
    assert rep.defect == pytest.approx(rep.factorized, abs=1e-9)
    assert rep.defect == pytest.approx(edge_defect_bruteforce(f, X), abs=1e-9)
    assert rep.margin >= -1e-9


def test_size_mismatch():
    with pytest.raises(DomainError):
        eml_defect(random_unitaries(4, 2, 0), cycle_graph(5))


def test_square_on_complete_graph_squares_bias():
    S = GeneratorMultiset(XorBits(3), [1, 2, 4, 7, 3])
    lam0 = bias_exact(S)
    out = eml_square(S, complete_graph_with_loops(S.size))
    assert out.size == 25
    assert bias_exact(out) == pytest.approx(lam0**2)
    assert character_bias_bruteforce(out.elements, 3) == pytest.approx(lam0**2)


def test_square_on_aghp_graph_meets_bound():
    rng = np.random.default_rng(4)
    A = aghp_set(8, 4)
    X = cayley_graph(A.multiset)
    S = GeneratorMultiset(XorBits(6), rng.integers(0, 64, size=X.n))
    lam0 = bias_exact(S)
    out = eml_square(S, X)
    assert out.size == S.size * X.d
    lam_x = graph_lambda_full_spectrum(X.nbr, False)
    assert bias_exact(out) <= lam0**2 + lam_x + 1e-9
    assert bias_exact(out) == pytest.approx(character_bias_bruteforce(out.elements, 6), abs=1e-12)


def test_square_edge_order():
    S = GeneratorMultiset(XorBits(3), [1, 2, 4, 6])
    X = cycle_graph(4)
    out = eml_square(S, X)
    want = [S.elements[X.nbr[x, i]] ^ S.elements[x] for x in range(4) for i in range(X.d)]
    assert out.elements.tolist() == [int(v) for v in want]


def test_phase_counts():
    assert phase1_repetitions(0.25) == 0
    assert phase1_repetitions(0.5) == math.ceil(math.log(0.5) / math.log(0.75))
    assert phase2_rounds(2.0**-8) == 3
    assert phase2_rounds(0.25) == 0


def test_quarter_start_skips_phase_one():
    rng = np.random.default_rng(0)
    S = GeneratorMultiset(XorBits(6), rng.integers(0, 64, size=200))
    assert bias_exact(S) <= 0.25
    out, rep = iterated_eml_amplify(S, 0.05)
    assert rep.rounds and all(r.phase == 2 for r in rep.rounds)
    assert rep.phase1_limit == 0 and bias_exact(out) <= 0.05


def test_iterated_to_two_pow_minus_8():
    rng = np.random.default_rng(3)
    el = rng.integers(0, 256, size=32)
    S = GeneratorMultiset(XorBits(8), np.concatenate([el, el]))
    out, rep = iterated_eml_amplify(S, 2.0**-8, provider=ExpanderProvider("auto"))
    assert bias_exact(out) <= 2.0**-8
    assert rep.bias_out == pytest.approx(bias_exact(out))
    assert rep.recurrence_ok
    prev = None
    for r in rep.rounds:
        if r.phase == 2:
            assert r.bias_out <= 2 * r.bias_prepared**2 + 1e-12
            assert r.aux_lambda <= r.bias_in**2 + 1e-12
        if prev is not None:
            assert r.bias_in == pytest.approx(prev.bias_out)
        prev = r


def test_iterated_precondition():
    S = GeneratorMultiset(XorBits(2), [1, 1])
    with pytest.raises(PreconditionError):
        iterated_eml_amplify(S, 0.1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(4, 12), ell=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_eml_bound_property(n, ell, seed):
    if n % 2:
        n += 1
    X = random_regular_graph(n, 3, seed)
    f = random_unitaries(n, ell, seed)
    rep = eml_defect(f, X)
    assert rep.lambda_x == pytest.approx(lambda_of(X).value)
    assert rep.defect <= rep.lambda_x * rep.max_norm**2 + 1e-9
