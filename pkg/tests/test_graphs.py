import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opamp._errors import DomainError, IrregularGraphError
from opamp.graphs import (
    LocalInversion, check_local_inversion, circulant_graph, complete_graph, complete_graph_with_loops,
    cycle_graph, diameter, diameter_bound_steps, from_edges, graph_power, lambda_of, petersen_graph,
    random_regular_graph,
)
from opamp.groups import GeneratorMultiset, XorBits, cayley_graph
from opamp.spectral import deflated_power

from oracles import cycle_lambda, graph_lambda_full_spectrum


def test_complete_graph_spectrum():
    assert lambda_of(complete_graph(5)).value == pytest.approx(0.25, abs=1e-9)
    assert lambda_of(complete_graph_with_loops(7)).value == 0.0


def test_cycle_spectra():
    # the largest nontrivial |eigenvalue| of C_5 is |cos(4 pi / 5)| = cos(pi / 5)
    assert lambda_of(cycle_graph(5)).value == pytest.approx(cycle_lambda(5), abs=1e-9)
    assert lambda_of(cycle_graph(5)).value == pytest.approx(math.cos(math.pi / 5), abs=1e-9)
    assert lambda_of(cycle_graph(6)).value == pytest.approx(1.0, abs=1e-9)


def test_lambda_rejects_bad_tol():
    with pytest.raises(DomainError):
        lambda_of(cycle_graph(5), tol=0)


def test_disconnected_graph_reports_one():
    g = from_edges(6, 2, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert lambda_of(g).value == pytest.approx(1.0)
    assert diameter(g) == math.inf


def test_power_and_lanczos_match_dense():
    g = random_regular_graph(300, 4, seed=11)
    dense = lambda_of(g).value
    power = lambda_of(g, dense_cap=0, method="power")
    auto = lambda_of(g, dense_cap=0)
    assert power.method == "power-iteration"
    assert power.value == pytest.approx(dense, abs=1e-8)
    assert auto.value == pytest.approx(dense, abs=1e-8)
    assert dense == pytest.approx(graph_lambda_full_spectrum(g.nbr), abs=1e-10)


def test_deflated_power_rejects_unknown_method():
    with pytest.raises(DomainError):
        deflated_power(lambda X: X, lambda X: X, 4, method="qr")


def test_directed_graph_uses_singular_values():
    from opamp.graphs import RotationGraph
    nbr = np.array([[(v + 1) % 6, (v + 2) % 6] for v in range(6)])
    rep = lambda_of(RotationGraph(nbr, None, directed=True))
    assert rep.directed
    assert rep.value == pytest.approx(graph_lambda_full_spectrum(nbr, directed=True), abs=1e-9)


def test_graph_power_examples():
    assert lambda_of(graph_power(cycle_graph(4), 2)).value == pytest.approx(1.0)
    assert lambda_of(graph_power(cycle_graph(5), 2)).value == pytest.approx(math.cos(math.pi / 5) ** 2)
    g = petersen_graph()
    assert graph_power(g, 1).same_rotation(g)


def test_graph_power_degree_and_lambda():
    g = random_regular_graph(40, 3, seed=1)
    g3 = graph_power(g, 3)
    assert g3.d == 27
    assert lambda_of(g3).value == pytest.approx(lambda_of(g).value ** 3, abs=1e-9)


def test_local_inversion_examples():
    q2 = cayley_graph(GeneratorMultiset(XorBits(2), [1, 2]))
    assert check_local_inversion(q2, LocalInversion([0, 1]))
    z5 = circulant_graph(5, [1, 4])
    assert check_local_inversion(z5, LocalInversion([1, 0]))
    assert not check_local_inversion(z5, LocalInversion([0, 1]))
    with pytest.raises(DomainError):
        LocalInversion([0, 0])


def test_diameter_examples():
    assert diameter(cycle_graph(6)) == 3
    assert diameter(complete_graph(5)) == 1
    assert diameter(petersen_graph()) == 2


def test_diameter_of_amplified_cayley_graph():
    from opamp.zoo import aghp_set
    A = aghp_set(8, 4)
    g = cayley_graph(A.multiset)
    lam = lambda_of(g).value
    t = diameter_bound_steps(lam, g.n)
    assert lam ** t < 1 / g.n
    assert diameter(g) <= t


def test_from_edges_rejects_irregular():
    with pytest.raises(IrregularGraphError):
        from_edges(3, 2, [(0, 1), (1, 2)])


def test_invalid_rotation_rejected():
    from opamp.graphs import RotationGraph
    with pytest.raises(DomainError):
        RotationGraph([[1], [0]], [[1], [0]])


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40), d=st.integers(1, 6), seed=st.integers(0, 10**6))
def test_random_regular_rotation_is_involution(n, d, seed):
    if (n * d) % 2:
        n += 1
    g = random_regular_graph(n, d, seed)
    for v in range(g.n):
        for i in range(g.d):
            u, j = g.rot(v, i)
            assert g.rot(u, j) == (v, i)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 60), d=st.integers(2, 5), seed=st.integers(0, 10**6))
def test_lambda_matches_full_spectrum(n, d, seed):
    if (n * d) % 2:
        n += 1
    g = random_regular_graph(n, d, seed)
    assert lambda_of(g).value == pytest.approx(graph_lambda_full_spectrum(g.nbr), abs=1e-9)
