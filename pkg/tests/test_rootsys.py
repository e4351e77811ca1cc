import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chamber.rootsys import (RootSystem, RootSystemError, dunkl_model, orbit_count, reflect, standard_root_system,
                             validate)


@pytest.mark.parametrize("family,rank,npos,nsimple", [
    ("A", 1, 1, 1), ("A", 2, 3, 2), ("A", 3, 6, 3), ("B", 2, 4, 2), ("B", 3, 9, 3),
    ("D", 4, 12, 4), ("I2", 5, 5, 2), ("I2", 6, 6, 2), ("I2", 3, 3, 2),
])
def test_standard_systems_are_valid(family, rank, npos, nsimple):
    rs = standard_root_system(family, rank, [1.0] * orbit_count(family, rank))
    rep = validate(rs)
    assert rep.ok, rep.failures
    assert (rep.n_positive, rep.n_simple) == (npos, nsimple)


def test_orbit_counts():
    assert validate(standard_root_system("I2", 4, [0.3, 0.6])).n_orbits == 2
    assert validate(standard_root_system("I2", 5, [0.3])).n_orbits == 1
    assert validate(standard_root_system("B", 3, [1.0, 0.5])).n_orbits == 2
    with pytest.raises(RootSystemError):
        standard_root_system("B", 3, [1.0, 0.5, 0.2])


def test_b_orbit_order_long_then_short():
    rs = standard_root_system("B", 2, [0.7, 0.2])
    for i, r in enumerate(rs.roots):
        assert rs.k[i] == (0.2 if np.isclose(r @ r, 1.0) else 0.7)


def test_reflection_is_involution_and_fixes_hyperplane():
    a = np.array([1.0, -1.0, 0.0])
    x = np.array([0.3, 2.0, -1.0])
    assert np.allclose(reflect(a, reflect(a, x)), x)
    assert np.allclose(reflect(a, a), -a)
    h = np.array([1.0, 1.0, 5.0])
    assert np.allclose(reflect(a, h), h)


def test_tampered_system_fails():
    rs = standard_root_system("A", 2, [1.0])
    d = rs.to_dict()
    d["roots"][0] = [1.0, -0.9, 0.0]
    assert not validate(RootSystem.from_dict(d)).ok


def test_non_invariant_multiplicity_fails():
    rs = standard_root_system("A", 2, [1.0])
    rs.k[0] = 0.3
    rep = validate(rs)
    assert not rep.ok and any("invariant" in f for f in rep.failures)


def test_non_crystallographic_dihedral_passes():
    # I2(5) has irrational simple coordinates; the integrality axiom is not applied there
    assert validate(standard_root_system("I2", 5, [1.0])).ok


def test_dict_round_trip():
    rs = standard_root_system("D", 4, [0.5])
    back = RootSystem.from_dict(json.loads(json.dumps(rs.to_dict())))
    assert validate(back).ok
    assert np.array_equal(back.roots, rs.roots)


@given(st.sampled_from([("A", 2), ("A", 3), ("B", 3), ("D", 4), ("I2", 5), ("I2", 8)]),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_group_preserves_root_set(fr, v):
    family, rank = fr
    rs = standard_root_system(family, rank, [1.0] * orbit_count(family, rank))
    x = np.array(v[: rs.dimension])
    for alpha in rs.roots:
        # s_alpha permutes R and is an isometry
        assert all(rs.index_of(reflect(alpha, beta)) >= 0 for beta in rs.roots)
        assert np.linalg.norm(reflect(alpha, x)) == pytest.approx(np.linalg.norm(x), abs=1e-12)


def test_dunkl_model_drift_and_start():
    m = dunkl_model(standard_root_system("A", 2, [1.0]))
    assert np.allclose(m.drift([2.0, 1.0, 0.0]), [1.5, 0.0, -1.5])
    S = m.domain.normals[[0, 2]]
    assert np.allclose(S @ m.initial_point, 0.5)
    assert list(m.face_notes) == [1]
    with pytest.raises(RootSystemError):
        dunkl_model(standard_root_system("A", 2, [0.0]))
