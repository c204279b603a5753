"""Small argument checkers shared by the functional API and the estimators."""
import math
import numbers

import numpy as np

from ._errors import DomainError


def check_unit_interval(value, name, *, open_left=True, open_right=True):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if math.isnan(value):
        raise DomainError(f"{name} is NaN")
    lo_ok = value > 0 if open_left else value >= 0
    hi_ok = value < 1 if open_right else value <= 1
    if not (lo_ok and hi_ok):
        lo = "(" if open_left else "["
        hi = ")" if open_right else "]"
        raise DomainError(f"{name} must lie in {lo}0, 1{hi}, got {value}")
    return value


def check_positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not value > 0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value


def check_natural(value, name, minimum=0):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_power_of_two(value, name):
    value = check_natural(value, name, 1)
    if value & (value - 1):
        raise DomainError(f"{name} must be a power of two, got {value}")
    return value


def check_multiset(S, *, symmetric=False, explicit=False):
    from .groups import GeneratorMultiset

    if not isinstance(S, GeneratorMultiset):
        raise DomainError(f"expected a GeneratorMultiset, got {type(S).__name__}")
    if S.size == 0:
        raise DomainError("generator multiset is empty")
    if symmetric and not S.symmetric:
        raise DomainError("this construction needs a symmetric generator multiset")
    if explicit and not S.is_explicit:
        raise DomainError("this construction needs an explicit (ordered) multiset")
    return S


def check_graph(g, *, undirected=False):
    from .graphs import RotationGraph

    if not isinstance(g, RotationGraph):
        raise DomainError(f"expected a RotationGraph, got {type(g).__name__}")
    if undirected and g.directed:
        raise DomainError("this operation needs an undirected graph")
    return g
