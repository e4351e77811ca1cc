import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chamber.classifier import (IndeterminateClassification, Repulsion, ScaleFunction, classify,
                                regress_exponent, satisfies_rost_vares, scale)
from chamber.potentials import CallablePotential, HyperbolicLogSinh, LogBarrier, ShiftedLog, TrigLogSin, Zero


def test_scale_examples():
    assert scale(Zero(), 3.0) == pytest.approx(2.0)
    assert scale(LogBarrier(0.5), math.e) == pytest.approx(1.0, rel=1e-9)
    assert scale(Zero(), 0.5) == pytest.approx(-0.5)
    assert ScaleFunction(LogBarrier(0.25))(4.0) == pytest.approx(2.0 * (4.0**0.5 - 1.0), rel=1e-9)


def test_scale_diverges_for_strong_barrier():
    # exp(2 phi) = u^-2 gamma: p(x) = (x^(1-2g) - 1)/(1-2g) grows without bound as x -> 0 when g > 1/2
    g = 0.8
    vals = [scale(LogBarrier(g), x) for x in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] == pytest.approx(((1e-6) ** (1 - 2 * g) - 1) / (1 - 2 * g), rel=1e-8)


@pytest.mark.parametrize("family", [LogBarrier, TrigLogSin, HyperbolicLogSinh])
@pytest.mark.parametrize("g", [0.1, 0.3, 0.49, 0.5, 0.51, 0.7, 0.9])
def test_threshold_at_one_half(family, g):
    bc = classify(family(g))
    assert (bc.kind is Repulsion.STRONG) == (g >= 0.5)
    assert bc.kind in (Repulsion.STRONG, Repulsion.MIDDLE)


@pytest.mark.parametrize("g", [0.1, 0.3, 0.7, 1.5])
def test_regression_recovers_exponent(g):
    for p in (LogBarrier(g), TrigLogSin(g), HyperbolicLogSinh(g)):
        assert regress_exponent(p) == pytest.approx(g, abs=1e-3)
        assert classify(p, use_hint=False).kind is classify(p).kind


def test_weak_faces():
    assert classify(Zero()).kind is Repulsion.WEAK
    assert classify(ShiftedLog(0.7, 0.1)).kind is Repulsion.WEAK
    assert classify(Zero()).prediction == "reachable with reflection"


def test_near_critical_regression_is_indeterminate():
    p = CallablePotential(lambda u: -0.505 * np.log(u), lambda u: -0.505 / u)
    with pytest.raises(IndeterminateClassification):
        classify(p)
    # a declared exponent settles it
    p2 = CallablePotential(lambda u: -0.505 * np.log(u), lambda u: -0.505 / u, zero_exponent=0.505)
    assert classify(p2).kind is Repulsion.STRONG


@given(st.floats(0.01, 3.0).filter(lambda g: abs(g - 0.5) > 0.03))
def test_regression_and_hint_agree(g):
    p = CallablePotential(lambda u: -g * np.log(u), lambda u: -g / u)
    assert classify(p).kind is classify(LogBarrier(g)).kind


def test_non_collision_condition():
    # phi'^2 exp(-2 phi) = g^2 u^(2g - 2): integrable at 0 only when g > 1/2
    assert not satisfies_rost_vares(LogBarrier(0.2))
    assert satisfies_rost_vares(LogBarrier(0.7))
    assert satisfies_rost_vares(LogBarrier(2.0))
    assert not satisfies_rost_vares(Zero())
    # phi = u^-1: phi'^2 exp(-2 phi) decays, integrable
    assert satisfies_rost_vares(CallablePotential(lambda u: 1 / u, lambda u: -1 / u**2))


@pytest.mark.parametrize("p", [LogBarrier(0.6), LogBarrier(3.0), HyperbolicLogSinh(0.8), TrigLogSin(1.2),
                               CallablePotential(lambda u: 1 / u, lambda u: -1 / u**2),
                               CallablePotential(lambda u: -np.log(u) + u * u, lambda u: -1 / u + 2 * u)])
def test_non_collision_condition_implies_strong(p):
    assert satisfies_rost_vares(p)
    assert classify(p).kind is Repulsion.STRONG


def test_scale_diagnostics_are_opt_in():
    assert classify(LogBarrier(0.3)).diagnostics == {}
    for g in (0.3, 0.8):
        diag = classify(LogBarrier(g), scale_diagnostics=True).diagnostics
        for key, x in (("p(1e-2)", 1e-2), ("p(1e-4)", 1e-4)):
            # u^(-2g) integrates in closed form
            assert diag[key] == pytest.approx((x ** (1 - 2 * g) - 1) / (1 - 2 * g), rel=1e-8)
