import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chamber import potentials as P
from chamber.potentials import (CallablePotential, HyperbolicLogSinh, LogBarrier, PotentialDomainError, Scaled,
                                ShiftedLog, TrigLogSin, Zero, _generic_prox, potential_from_spec, prox1d)

from oracles import log_barrier_prox_closed, prox_oracle

gammas = st.floats(0.05, 2.0)
zs = st.floats(-5.0, 5.0)
taus = st.floats(1e-6, 1.0)


def test_log_barrier_example():
    y, lam = prox1d(LogBarrier(0.5), 0.0, 0.02)
    assert y == pytest.approx(0.1, abs=1e-14)
    assert lam == 0.0


def test_zero_prox_is_clamp():
    assert prox1d(Zero(), -0.3, 0.1) == (0.0, pytest.approx(0.3))
    assert prox1d(Zero(), 1.2, 0.1) == (1.2, 0.0)


def test_hyperbolic_slope_at_large_gap():
    r = math.sqrt(2) * 10.0
    assert P.deriv(HyperbolicLogSinh(1.0), 10.0) == pytest.approx(-math.sqrt(2) / math.tanh(r), rel=1e-14)
    assert P.deriv(HyperbolicLogSinh(1.0), 10.0) == pytest.approx(-1.41421, abs=1e-5)


def test_domain_errors():
    with pytest.raises(PotentialDomainError):
        P.deriv(LogBarrier(1.0), 0.0)
    with pytest.raises(PotentialDomainError):
        P.eval(LogBarrier(1.0), -1.0)
    assert math.isinf(P.eval(LogBarrier(1.0), 0.0))
    assert P.eval(ShiftedLog(1.0, 2.0), 0.0) == pytest.approx(-math.log(2.0))
    with pytest.raises(ValueError):
        prox1d(LogBarrier(1.0), 0.0, 0.0)


@pytest.mark.parametrize("bad", [lambda: LogBarrier(0.0), lambda: ShiftedLog(1.0, 0.0),
                                 lambda: TrigLogSin(-1.0), lambda: Scaled(Zero(), 0.0)])
def test_invalid_parameters(bad):
    with pytest.raises(ValueError):
        bad()


@given(gammas, zs, taus)
def test_log_barrier_closed_form_matches_formula(g, z, tau):
    y, lam = prox1d(LogBarrier(g), z, tau)
    assert y == pytest.approx(log_barrier_prox_closed(z, tau, g), rel=1e-12, abs=1e-300)
    assert y > 0 and lam == 0.0


@given(gammas, zs, taus)
def test_generic_prox_agrees_with_closed_form(g, z, tau):
    p = LogBarrier(g)
    y_gen, _ = _generic_prox(p, np.array([z]), tau)
    y_cf, _ = p.prox(np.array([z]), tau)
    assert abs(y_gen[0] - y_cf[0]) <= 1e-10 * max(1.0, y_cf[0])


@given(gammas, st.floats(0.1, 3.0), zs, taus)
def test_shifted_log_satisfies_optimality(g, c, z, tau):
    p = ShiftedLog(g, c)
    y, lam = prox1d(p, z, tau)
    assert y >= 0 and lam >= 0
    slope = p.derivative(y) if y > 0 else p.derivative_limit_at_zero
    assert abs(y - z + tau * slope - lam) <= 1e-10 * (1 + abs(z))
    assert lam == 0.0 or y == 0.0


@given(gammas, st.floats(0.1, 4.0), zs, taus)
def test_scaled_prox_is_exact_reduction(g, s, z, tau):
    p = Scaled(LogBarrier(g), s)
    y, _ = prox1d(p, z, tau)
    # optimality of y for u -> base(s u)
    assert abs(y - z + tau * p.derivative(y)) <= 1e-9 * (1 + abs(z) + abs(tau * p.derivative(y)))


@pytest.mark.parametrize("kind,params", [("trig_log_sin", {"gamma": 0.7, "scale": 2 * math.sqrt(2)}),
                                         ("hyp_log_sinh", {"gamma": 0.3}),
                                         ("log", {"gamma": 1.3}),
                                         ("shifted_log", {"gamma": 0.4, "c": 0.5})])
@pytest.mark.parametrize("z,tau", [(-1.0, 1e-4), (0.2, 1e-2), (3.0, 0.5), (1e-3, 1e-6)])
def test_prox_against_oracle(kind, params, z, tau):
    p = potential_from_spec({"kind": kind, **params})
    y, _ = prox1d(p, z, tau)
    assert y == pytest.approx(prox_oracle(kind, params, z, tau, p.upper), abs=1e-10)


def test_callable_potential_uses_generic_solver():
    p = CallablePotential(lambda u: -0.4 * np.log(u), lambda u: -0.4 / u, zero_exponent=0.4)
    y, _ = prox1d(p, -0.5, 0.01)
    assert y == pytest.approx(log_barrier_prox_closed(-0.5, 0.01, 0.4), rel=1e-12)


def test_spec_round_trip():
    for p in [Zero(), LogBarrier(0.3), ShiftedLog(0.2, 1.5), TrigLogSin(0.5, 3.0), HyperbolicLogSinh(0.9),
              Scaled(LogBarrier(0.4), math.sqrt(2))]:
        assert potential_from_spec(p.to_spec()) == p


def test_contracts_hold():
    for p in [Zero(), LogBarrier(0.3), ShiftedLog(0.2, 1.5), TrigLogSin(0.5), HyperbolicLogSinh(0.9),
              Scaled(LogBarrier(0.4), 2.0)]:
        assert P.check_contract(p) == []
    concave = CallablePotential(lambda u: np.log(u), lambda u: 1 / u)
    assert P.check_contract(concave)


def test_trig_prox_stays_below_upper_end():
    p = TrigLogSin(0.5)
    y, _ = prox1d(p, 100.0, 0.01)
    assert 0 < y < p.upper
