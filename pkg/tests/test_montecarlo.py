import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chamber.geometry import EmptyIntersectionError
from chamber.integrator import SimConfig
from chamber.models import build_custom
from chamber.montecarlo import (EnsembleData, edge_watch, moment_check, run_ensemble, simulate_ensemble,
                                summarize, verdicts, wilson_interval)

from oracles import quadrant_corner_approach


def one_d(gamma, x0):
    return build_custom({"faces": [{"normal": [1.0], "potential": {"kind": "log", "gamma": gamma}}],
                         "initial_point": [x0]})


@given(st.integers(1, 500).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_contains_estimate(kn):
    k, n = kn
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_edges():
    assert wilson_interval(0, 500)[0] == 0.0
    assert wilson_interval(500, 500)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_zero_horizon_ensemble():
    m = one_d(0.3, 0.5)
    r = run_ensemble(m, SimConfig(horizon=0.0, seed=1), 100)
    assert r.faces[0].hit_fraction == 0.0
    assert r.faces[0].min_gap_q01 == 0.5
    mc = moment_check(m, SimConfig(horizon=0.0, seed=1), 50, "|X|^2", target=0.25)
    assert mc.estimate == 0.25 and mc.stderr == 0.0 and mc.z == 0.0


def test_ensemble_independent_of_threads():
    m = one_d(0.3, 0.2)
    cfg = SimConfig(dt=1e-3, horizon=0.2, seed=4)
    a = simulate_ensemble(m, cfg, 600, threads=1)
    b = simulate_ensemble(m, cfg, 600, threads=3)
    for f in ("min_gaps", "local_time", "first_hit", "final_state", "occupation"):
        assert np.array_equal(getattr(a, f), getattr(b, f), equal_nan=True)


def test_hit_fraction_monotone_in_eps():
    m = one_d(0.3, 0.05)
    data = simulate_ensemble(m, SimConfig(dt=1e-3, horizon=0.5, seed=2), 200)
    fr = [data.hit_at(e).mean() for e in np.geomspace(1e-5, 1e-1, 9)]
    assert all(a <= b for a, b in zip(fr, fr[1:]))


def test_report_fields_and_invariants():
    m = one_d(0.3, 0.1)
    cfg = SimConfig(dt=1e-3, horizon=0.5, seed=2)
    r = run_ensemble(m, cfg, 120)
    f = r.faces[0]
    assert 0 <= f.ci[0] <= f.hit_fraction <= f.ci[1] <= 1
    assert f.local_time_mean == 0.0  # singular face: no multiplier mass at all
    assert r.n == 120 and r.config["seed"] == 2 and r.wall_clock > 0
    assert set(r.moments) >= {"|X_T|^2", "X_T", "total_local_time"}
    d = r.to_dict()
    assert d["faces"][0]["label"] == "face0"


def test_edge_watch_rejects_empty_edge_and_singletons():
    slab = build_custom({"faces": [{"normal": [1.0]}, {"normal": [-1.0], "offset": -1.0}], "initial_point": [0.5]})
    with pytest.raises(EmptyIntersectionError):
        edge_watch(slab, SimConfig(horizon=0.01, seed=1), 4, (0, 1))
    orth = build_custom({"faces": [{"normal": [1.0, 0.0]}, {"normal": [0.0, 1.0]}], "initial_point": [1.0, 1.0]})
    with pytest.raises(Exception):
        edge_watch(orth, SimConfig(horizon=0.01, seed=1), 4, (0,))


def test_verdicts():
    strong = run_ensemble(one_d(0.9, 0.5), SimConfig(dt=1e-3, horizon=0.2, seed=1), 50)
    assert verdicts(strong)[0][2] == "CONSISTENT"
    middle = run_ensemble(one_d(0.1, 0.02), SimConfig(dt=1e-3, horizon=0.5, seed=1), 50)
    assert middle.faces[0].hit_fraction > 0
    assert verdicts(middle)[0][2] == "CONSISTENT"


def test_moment_check_observables():
    m = one_d(1.5, 1.0)
    with pytest.raises(ValueError):
        moment_check(m, SimConfig(horizon=0.0, seed=1), 5, "energy")
    mc = moment_check(m, SimConfig(dt=1e-3, horizon=0.1, seed=1), 100, "coordinate")
    assert mc.z is None and mc.passed is None


@pytest.mark.slow
def test_one_d_hit_fraction_matches_bessel_law():
    # dimension 2*gamma + 1 Bessel from x hits 0 by T with probability Q(1/2 - gamma, x^2 / 2T)
    from scipy.special import gammaincc

    exact = gammaincc(0.25, 0.5 ** 2 / 8.0)
    r = run_ensemble(one_d(0.25, 0.5), SimConfig(dt=1e-4, horizon=4.0, seed=20261016), 500)
    p = r.faces[0].hit_fraction
    assert abs(p - exact) <= 3 * math.sqrt(exact * (1 - exact) / 500)


@pytest.mark.slow
@pytest.mark.parametrize("gamma,check", [(0.75, lambda f: f.hit_fraction == 0.0 and f.min_gap_q01 > 3e-3),
                                         (0.25, lambda f: f.hit_fraction >= 0.5)])
def test_one_d_strong_and_middle_examples(gamma, check):
    r = run_ensemble(one_d(gamma, 0.5), SimConfig(dt=1e-4, horizon=4.0, seed=20261016, hit_eps=1e-3), 500)
    assert check(r.faces[0])
    assert verdicts(r)[0][2] == "CONSISTENT"


def test_strong_min_gap_quantile_stable_under_dt_halving():
    q = [run_ensemble(one_d(0.75, 0.5), SimConfig(dt=dt, horizon=1.0, seed=3), 256).faces[0].min_gap_q01
         for dt in (1e-3, 5e-4, 2.5e-4)]
    assert min(q) > 3e-3
    assert all(0.5 <= b / a <= 2.0 for a, b in zip(q, q[1:]))


def test_explicit_scheme_multiplier_mass_shrinks_with_dt():
    lt = [run_ensemble(one_d(0.3, 0.05), SimConfig(dt=dt, horizon=0.5, seed=3, scheme="projected"), 256)
          .faces[0].local_time_mean for dt in (1e-3, 2.5e-4)]
    assert lt[1] < lt[0]
    prox = run_ensemble(one_d(0.3, 0.05), SimConfig(dt=1e-3, horizon=0.5, seed=3), 256)
    assert prox.faces[0].local_time_mean == 0.0


def test_corner_law_oracle():
    # far from the corner nothing happens quickly; the law grows with eps
    ps = [quadrant_corner_approach(math.sqrt(2), e, 1.0) for e in (1e-3, 1e-2, 1e-1)]
    assert ps == sorted(ps)
    assert ps[0] == pytest.approx(0.017537, abs=1e-5)
    assert quadrant_corner_approach(math.sqrt(2), 1.0, 1e-3) < 1e-12


@pytest.mark.slow
@pytest.mark.parametrize("eps", [1e-1, 3e-2])
def test_orthant_corner_fraction_matches_exact_law(eps):
    # the corner of a reflecting quadrant is polar but is approached at every positive distance
    orth = build_custom({"faces": [{"normal": [1.0, 0.0]}, {"normal": [0.0, 1.0]}], "initial_point": [1.0, 1.0]})
    ew = edge_watch(orth, SimConfig(dt=1e-4, horizon=1.0, seed=7, edge_eps=eps), 1000, (0, 1))
    p = quadrant_corner_approach(math.sqrt(2), eps, 1.0)
    assert abs(ew.hit_fraction - p) <= 3 * math.sqrt(p * (1 - p) / 1000)
