import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from opamp._errors import DomainError
from opamp.estimators import EmlAmplifier, GraphTransformer, SWideAmplifier, WalkAmplifier
from opamp.graphs import lambda_of, petersen_graph
from opamp.groups import GeneratorMultiset, XorBits, bias_exact, cayley_graph

from oracles import character_bias_weighted


def z2_input(m=6, size=20, seed=5):
    rng = np.random.default_rng(seed)
    el = rng.integers(0, 1 << m, size=size)
    return GeneratorMultiset(XorBits(m), np.concatenate([el, el]))


def test_params_round_trip_and_clone():
    est = WalkAmplifier(lam=0.05, beta=0.5)
    assert est.get_params() == {"lam": 0.05, "beta": 0.5, "provider": "auto"}
    est.set_params(lam=0.2)
    assert est.lam == 0.2
    twin = clone(est)
    assert twin is not est and twin.get_params() == est.get_params()
    assert "lam=0.2" in repr(est)


def test_all_estimators_expose_params():
    for est in [WalkAmplifier(), SWideAmplifier(), EmlAmplifier(), GraphTransformer()]:
        params = est.get_params()
        assert "lam" in params
        assert clone(est).get_params() == params


def test_not_fitted():
    with pytest.raises(NotFittedError):
        WalkAmplifier().transform(z2_input())
    with pytest.raises(NotFittedError):
        GraphTransformer().transform(petersen_graph())


def test_invalid_params_raise_on_fit():
    S = z2_input()
    with pytest.raises(DomainError):
        WalkAmplifier(lam=1.5).fit(S)
    with pytest.raises(DomainError):
        SWideAmplifier(small_s=0).fit(S)
    with pytest.raises(DomainError):
        GraphTransformer(lam=-0.1).fit(petersen_graph())


def test_invalid_input_raises():
    with pytest.raises(DomainError):
        WalkAmplifier().fit([1, 2, 3])


def test_walk_amplifier_fit_transform():
    S = z2_input()
    est = WalkAmplifier(lam=0.1)
    out = est.fit_transform(S)
    assert bias_exact(out) <= 0.1
    assert bias_exact(out) == pytest.approx(character_bias_weighted(out.distribution(), 6), abs=1e-12)
    assert est.transform(S) is out
    assert est.report_.size_out == out.size


def test_transform_on_new_input_rebuilds():
    est = WalkAmplifier(lam=0.2).fit(z2_input(seed=5))
    other = z2_input(seed=6)
    out = est.transform(other)
    assert out is not est.result_ and bias_exact(out) <= 0.2


def test_eml_amplifier():
    out = EmlAmplifier(lam=0.1).fit_transform(z2_input(seed=7))
    assert bias_exact(out) <= 0.1


def test_graph_transformer():
    g = cayley_graph(GeneratorMultiset(XorBits(6), [1, 2, 4, 8, 16, 32, 63, 21]))
    est = GraphTransformer(lam=0.25, audit_samples=16)
    X = est.fit_transform(g)
    assert X.n == g.n and lambda_of(X).value <= 0.25 + 1e-9
    assert est.transform(g) is X
    assert est.report_.audited_edges == 16
