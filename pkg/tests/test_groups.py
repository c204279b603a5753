import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opamp._errors import CapacityError, DomainError
from opamp.groups import (
    SL2, GeneratorMultiset, Symmetric, XorBits, bias_exact, bias_report, cayley_graph,
    coset_fourier_blocks, element_inverse, element_product, inverse_pairing, make_group,
    pad_with_identity,
)
from opamp.graphs import lambda_of

from oracles import (
    all_permutations, character_bias_bruteforce, graph_lambda_full_spectrum, symmetric_bias_via_irreps,
    symmetric_irreps,
)


def xor(m, elems):
    G = XorBits(m)
    return GeneratorMultiset(G, [G.parse(e) for e in elems])


def sym(n, images_1based):
    G = Symmetric(n)
    return GeneratorMultiset(G, [[v - 1 for v in p] for p in images_1based])


# --- element algebra -----------------------------------------------------------


def test_empty_product_is_identity():
    G = Symmetric(3)
    assert np.array_equal(element_product([], G).array(), [0, 1, 2])


def test_transposition_squared_is_identity():
    G = Symmetric(3)
    t = G.elem([1, 0, 2])
    assert np.array_equal(element_product([t, t]).array(), [0, 1, 2])


def test_xor_product():
    G = XorBits(2)
    out = element_product([G.elem(G.parse("01")), G.elem(G.parse("11"))])
    assert G.format(out.array()) == "10"


def test_product_rejects_mixed_groups():
    with pytest.raises(DomainError):
        element_product([XorBits(2).elem(1), XorBits(3).elem(1)])


def test_xor_inverse_is_self():
    G = XorBits(3)
    assert G.format(element_inverse(G.elem(G.parse("101"))).array()) == "101"


def test_sl2_inverse_matches_direct_product():
    G = SL2(5)
    g = G.elem([[1, 1], [0, 1]])
    inv = element_inverse(g)
    assert np.array_equal(inv.array(), [[1, 4], [0, 1]])
    assert np.array_equal((np.asarray(g.array()) @ np.asarray(inv.array())) % 5, np.eye(2))


def test_cycle_inverse():
    G = Symmetric(3)
    g = G.elem(np.array([2, 3, 1]) - 1)
    assert np.array_equal(np.asarray(element_inverse(g).array()) + 1, [3, 1, 2])


def test_symmetric_product_composes_right_to_left():
    G = Symmetric(3)
    a = G.elem([1, 0, 2])
    b = G.elem([0, 2, 1])
    ab = (a * b).array()
    assert [int(a.array()[int(b.array()[i])]) for i in range(3)] == list(ab)


def test_make_group_rejects_unknown_kind():
    with pytest.raises(DomainError):
        make_group("dihedral", 4)
    with pytest.raises(DomainError):
        SL2(9)


def test_symmetric_flag_validated():
    G = Symmetric(3)
    with pytest.raises(DomainError):
        GeneratorMultiset(G, [[1, 2, 0]], symmetric=True)
    assert not GeneratorMultiset(G, [[1, 2, 0]]).symmetric
    assert GeneratorMultiset(G, [[1, 2, 0], [2, 0, 1]]).symmetric


def test_counted_and_explicit_agree():
    S = xor(3, ["001", "010", "011", "011"])
    C = S.counted()
    assert not C.is_explicit and C.size == 4
    assert C.same_multiset(S)
    assert C.materialize().same_multiset(S)


# --- Cayley graphs ---------------------------------------------------------------


def test_cayley_hypercube_q2_is_four_cycle():
    g = cayley_graph(xor(2, ["01", "10"]))
    assert g.n == 4 and g.d == 2 and not g.directed
    assert np.array_equal(np.sort(g.adjacency_counts().sum(axis=0)), [2, 2, 2, 2])
    assert lambda_of(g).value == pytest.approx(1.0, abs=1e-12)


def test_cayley_sym3_transpositions_is_bipartite_by_sign():
    S = sym(3, [[2, 1, 3], [3, 2, 1], [1, 3, 2]])
    g = cayley_graph(S)
    assert (g.n, g.d) == (6, 3)
    sign = S.group.sign(S.group.elements)
    assert np.all(sign[g.nbr] == -sign[:, None])


def test_cayley_z2_single_generator_doubled_edge():
    g = cayley_graph(xor(1, ["1"]))
    assert (g.n, g.d) == (2, 1)
    assert lambda_of(g).value == pytest.approx(1.0)


def test_cayley_non_symmetric_is_directed():
    g = cayley_graph(sym(3, [[2, 3, 1]]))
    assert g.directed


def test_cayley_capacity_error():
    with pytest.raises(CapacityError):
        cayley_graph(GeneratorMultiset(SL2(101), [[[1, 1], [0, 1]], [[1, 100], [0, 1]]]))


def test_inverse_pairing_is_involution_matching_inverses():
    S = sym(4, [[2, 3, 4, 1], [4, 1, 2, 3], [2, 1, 3, 4], [2, 3, 4, 1], [4, 1, 2, 3]])
    phi = inverse_pairing(S)
    assert np.array_equal(phi[phi], np.arange(S.size))
    G = S.group
    assert np.array_equal(G.inverse(S.elements), S.elements[phi])


# --- padding and bias ----------------------------------------------------------------


def test_pad_whole_group_gives_half():
    S = xor(2, ["00", "01", "10", "11"])
    P = pad_with_identity(S, S.size)
    assert P.size == 8
    # the padded operator is theta/(1+theta) * I off the trivial block
    assert bias_exact(P) == pytest.approx(0.5)
    assert graph_lambda_full_spectrum(cayley_graph(P).nbr) == pytest.approx(0.5)


def test_pad_zero_is_unchanged():
    S = xor(2, ["01", "10", "11"])
    assert pad_with_identity(S, 0) is S


def test_pad_bias_bound():
    S = xor(2, ["01", "10", "11"] * 10)
    P = pad_with_identity(S, 3)
    assert bias_exact(P) <= 1 / 3 + 3 / 30 + 1e-12
    assert bias_exact(P) == pytest.approx(graph_lambda_full_spectrum(cayley_graph(P).nbr))


def test_bias_examples():
    assert bias_exact(xor(2, ["01", "10"])) == pytest.approx(1.0)
    assert bias_exact(xor(2, ["01", "10", "11"])) == pytest.approx(character_bias_bruteforce([1, 2, 3], 2))
    assert bias_exact(xor(2, ["01", "10", "11"])) == pytest.approx(1 / 3)
    assert bias_exact(xor(3, [format(i, "03b") for i in range(8)])) == pytest.approx(0.0, abs=1e-12)
    whole = GeneratorMultiset(Symmetric(4), Symmetric(4).elements)
    assert bias_exact(whole) == pytest.approx(0.0, abs=1e-12)


def test_bias_rejects_bad_tol():
    with pytest.raises(DomainError):
        bias_exact(xor(2, ["01"]), tol=0)


def test_bias_symmetric_group_matches_young_irreps():
    irreps = symmetric_irreps(5)
    rng = np.random.default_rng(3)
    perms = all_permutations(5)
    for _ in range(6):
        picks = [perms[i] for i in rng.choice(len(perms), size=5, replace=False)]
        elems = picks + [tuple(int(v) for v in np.argsort(p)) for p in picks]
        S = GeneratorMultiset(Symmetric(5), elems)
        assert bias_exact(S) == pytest.approx(symmetric_bias_via_irreps(elems, 5, irreps), abs=1e-9)


def test_bias_directed_symmetric_group_matches_young_irreps():
    rng = np.random.default_rng(4)
    perms = all_permutations(4)
    irreps = symmetric_irreps(4)
    for _ in range(5):
        elems = [perms[i] for i in rng.choice(len(perms), size=3, replace=False)]
        S = GeneratorMultiset(Symmetric(4), elems)
        assert bias_exact(S) == pytest.approx(symmetric_bias_via_irreps(elems, 4, irreps), abs=1e-9)


def test_bias_sl2_matches_full_spectrum():
    S = GeneratorMultiset(SL2(5), [[[1, 1], [0, 1]], [[1, 4], [0, 1]], [[1, 0], [1, 1]], [[1, 0], [4, 1]]])
    assert bias_exact(S) == pytest.approx(graph_lambda_full_spectrum(cayley_graph(S).nbr), abs=1e-9)


@pytest.mark.parametrize("kind,param", [("sl2", 7), ("symmetric", 5)])
def test_coset_fourier_matches_dense(kind, param):
    G = make_group(kind, param)
    rng = np.random.default_rng(7)
    idx = rng.choice(G.order, size=4, replace=False)
    el = G.elements[idx]
    S = GeneratorMultiset(G, np.concatenate([el, G.inverse(el)]))
    dense = bias_report(S, dense_cap=10**6)
    blocks = bias_report(S, dense_cap=100)
    assert dense.method == "dense" and blocks.method == "coset-fourier"
    assert blocks.value == pytest.approx(dense.value, abs=1e-9)
    assert coset_fourier_blocks(G, S.distribution(), cap=0) is None


def test_coset_fourier_directed_matches_dense():
    G = Symmetric(5)
    S = GeneratorMultiset(G, [[1, 2, 3, 4, 0], [1, 0, 2, 3, 4]])
    assert bias_report(S, dense_cap=100).value == pytest.approx(bias_report(S).value, abs=1e-9)


# --- properties --------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 6), data=st.data())
def test_bias_equals_character_oracle(m, data):
    elems = data.draw(st.lists(st.integers(0, (1 << m) - 1), min_size=1, max_size=12))
    S = GeneratorMultiset(XorBits(m), elems)
    assert bias_exact(S) == pytest.approx(character_bias_bruteforce(elems, m), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_symmetric_multisets_give_involutive_rotation(data):
    perms = all_permutations(4)
    picks = data.draw(st.lists(st.integers(0, 23), min_size=1, max_size=5))
    elems = [perms[i] for i in picks] + [tuple(int(v) for v in np.argsort(perms[i])) for i in picks]
    S = GeneratorMultiset(Symmetric(4), elems)
    assert S.symmetric
    g = cayley_graph(S)  # validation checks the involution on every port
    n, d = g.n, g.d
    assert np.array_equal(g.nbr[g.nbr, g.port], np.broadcast_to(np.arange(n)[:, None], (n, d)))


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 5), data=st.data())
def test_padding_lemma_property(m, data):
    elems = data.draw(st.lists(st.integers(0, (1 << m) - 1), min_size=1, max_size=10))
    count = data.draw(st.integers(0, 10))
    S = GeneratorMultiset(XorBits(m), elems)
    assert bias_exact(pad_with_identity(S, count)) <= bias_exact(S) + count / S.size + 1e-12
