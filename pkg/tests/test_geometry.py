import numpy as np
import pytest
from hypothesis import given, strategies as st

from chamber.geometry import (EmptyIntersectionError, Face, FaceSubset, GeometryError, PolyhedralDomain,
                              domain_from_arrays)

from oracles import project_bruteforce


def orthant(d=2):
    return domain_from_arrays(np.eye(d), np.zeros(d))


def test_face_requires_unit_normal():
    with pytest.raises(GeometryError):
        Face((1.0, 1.0), 0.0, "p")


def test_empty_interior_rejected():
    with pytest.raises(GeometryError):
        domain_from_arrays([[1.0], [-1.0]], [0.0, 0.0])  # x >= 0 and x <= 0


def test_duplicate_normals_rejected():
    with pytest.raises(GeometryError):
        domain_from_arrays([[1.0, 0.0], [1.0, 0.0]], [0.0, 1.0])


def test_gaps_and_active_set():
    D = orthant()
    assert np.allclose(D.gaps([0.5, 2.0]), [0.5, 2.0])
    assert D.active_set([0.0, 1.0]).indices == (0,)
    assert D.active_set([1.0, 1.0]) is None
    assert D.contains([0.0, 0.0]) and not D.contains([-1e-6, 1.0])


def test_orthant_projection_example():
    y, mu = orthant().project_with_multipliers([-0.05, 0.5])
    assert np.allclose(y, [0.0, 0.5]) and np.allclose(mu, [0.05, 0.0])


def test_subset_distance_and_empty_edge():
    D = orthant()
    assert D.subset_distance([3.0, 4.0], FaceSubset((0, 1))) == pytest.approx(5.0)
    slab = domain_from_arrays([[1.0], [-1.0]], [0.0, -1.0])  # 0 <= x <= 1
    with pytest.raises(EmptyIntersectionError):
        slab.subset_distance([0.5], FaceSubset((0, 1)))


def test_face_subset_normalizes():
    assert FaceSubset((2, 0, 2)).indices == (0, 2)
    with pytest.raises(GeometryError):
        FaceSubset(())
    with pytest.raises(GeometryError):
        FaceSubset((3,)).check(2)


@st.composite
def polyhedra(draw):
    d = draw(st.integers(1, 4))
    m = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    N = rng.standard_normal((m, d))
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    c = rng.standard_normal(d)
    a = N @ c - rng.uniform(0.1, 2.0, m)
    x = rng.standard_normal(d) * 3
    x2 = rng.standard_normal(d) * 3
    return N, a, x, x2


def _domain(N, a):
    try:
        return domain_from_arrays(N, a)
    except GeometryError:
        return None


@given(polyhedra())
def test_projection_matches_bruteforce(P):
    N, a, x, _ = P
    D = _domain(N, a)
    if D is None:
        return
    y, _ = D.project_with_multipliers(x)
    y_ref, _ = project_bruteforce(N, a, x)
    assert np.linalg.norm(y - y_ref) <= 1e-8 * (1 + np.linalg.norm(x))


@given(polyhedra())
def test_projection_properties(P):
    N, a, x, x2 = P
    D = _domain(N, a)
    if D is None:
        return
    y, mu = D.project_with_multipliers(x)
    assert D.gaps(y).min() >= -1e-10
    assert np.linalg.norm(D.project(y) - y) <= 1e-10
    assert np.linalg.norm(D.project(x2) - y) <= np.linalg.norm(x2 - x) + 1e-10
    assert np.all(mu >= 0)
    assert np.all((mu == 0) | (D.gaps(y) <= 1e-9))
    assert np.linalg.norm(y - x - mu @ N) <= 1e-9 * (1 + np.linalg.norm(x))


def test_facets_detect_redundant_faces():
    s = 1 / np.sqrt(2)
    D = domain_from_arrays([[s, -s, 0], [s, 0, -s], [0, s, -s]], [0, 0, 0])
    assert D.facets.tolist() == [True, False, True]
    assert orthant(3).facets.all()
