"""Estimator-style wrappers (fit / transform / get_params) over the amplification pipelines.

Each estimator is deterministic: ``fit`` runs the construction once and stores the
result together with its report; ``transform`` returns the stored result for the
fitted input and rebuilds it for any other input.
"""
from fractions import Fraction

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_graph, check_multiset, check_natural, check_unit_interval
from .zoo import ExpanderProvider


def _provider(name):
    return ExpanderProvider(name) if isinstance(name, str) else name


class _Amplifier(TransformerMixin, BaseEstimator):
    def _validate_params(self):
        check_unit_interval(self.lam, "lam")

    def _check_input(self, S):
        return check_multiset(S, symmetric=True)

    def fit(self, S, y=None):
        self._validate_params()
        S = self._check_input(S)
        self.input_ = S
        self.result_, self.report_ = self._build(S)
        return self

    def _same_input(self, S):
        return S is self.input_ or self.input_.same_multiset(S)

    def transform(self, S):
        check_is_fitted(self, "result_")
        S = self._check_input(S)
        if self._same_input(S):
            return self.result_
        return self._build(S)[0]

    def fit_transform(self, S, y=None, **fit_params):
        return self.fit(S).result_


class WalkAmplifier(_Amplifier):
    """Two-stage expander-walk amplification to bias ``lam``."""

    def __init__(self, lam=0.1, beta=1.0, provider="auto"):
        self.lam = lam
        self.beta = beta
        self.provider = provider

    def _validate_params(self):
        super()._validate_params()
        check_unit_interval(self.beta, "beta", open_right=False)

    def _build(self, S):
        from .walks import exp_walk_pipeline

        return exp_walk_pipeline(S, self.lam, self.beta, _provider(self.provider))


class SWideAmplifier(_Amplifier):
    """Walk boost followed by an s-wide derandomized walk (small-s desk mode)."""

    def __init__(self, lam=0.1, small_s=8, beta=Fraction(1, 32), provider="auto", fallback=True):
        self.lam = lam
        self.small_s = small_s
        self.beta = beta
        self.provider = provider
        self.fallback = fallback

    def _validate_params(self):
        super()._validate_params()
        check_natural(self.small_s, "small_s", 1)

    def _build(self, S):
        from .planner import almost_ramanujan_pipeline

        return almost_ramanujan_pipeline(S, self.lam, self.beta, ("small-s", int(self.small_s)),
                                         provider=_provider(self.provider), fallback=self.fallback)


class EmlAmplifier(_Amplifier):
    """Iterated operator-EML squaring."""

    def __init__(self, lam=0.1, provider="auto"):
        self.lam = lam
        self.provider = provider

    def _build(self, S):
        from .eml import iterated_eml_amplify

        return iterated_eml_amplify(S, self.lam, _provider(self.provider))


class GraphTransformer(TransformerMixin, BaseEstimator):
    """König decomposition, permutation amplification and reassembly of a regular graph."""

    def __init__(self, lam=0.25, engine="walks", provider="auto", audit_samples=64, seed=0):
        self.lam = lam
        self.engine = engine
        self.provider = provider
        self.audit_samples = audit_samples
        self.seed = seed

    def fit(self, g, y=None):
        from .permutations import transform_graph

        check_unit_interval(self.lam, "lam")
        check_graph(g, undirected=True)
        check_natural(self.audit_samples, "audit_samples", 0)
        self.input_ = g
        self.result_, self.report_ = transform_graph(
            g, self.lam, engine=self.engine, provider=_provider(self.provider),
            audit_samples=self.audit_samples, seed=self.seed)
        return self

    def transform(self, g):
        check_is_fitted(self, "result_")
        if g is self.input_ or g.same_rotation(self.input_):
            return self.result_
        return type(self)(**self.get_params()).fit(g).result_

    def fit_transform(self, g, y=None, **fit_params):
        return self.fit(g).result_
