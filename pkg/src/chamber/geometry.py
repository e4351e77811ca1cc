"""Convex polyhedral domains ``{x : x . n_i > a_i for all i}``.

Faces carry unit normals. Projection onto the closed domain is a least
distance program solved through its dual nonnegative least-squares problem,
followed by an equality-constrained polish on the detected active set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog, lsq_linear

UNIT_TOL = 1e-12
MARGIN_TOL = 1e-9


class GeometryError(ValueError):
    pass


class EmptyIntersectionError(GeometryError):
    """The affine set where all faces of a subset are tight is empty."""


class ProjectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Face:
    normal: tuple[float, ...]
    offset: float
    potential_id: str
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(v) for v in self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        norm = float(np.linalg.norm(self.normal))
        if abs(norm - 1.0) > UNIT_TOL:
            raise GeometryError(
                f"face {self.label or self.potential_id!r}: |normal| = {norm!r}, expected 1"
            )


@dataclass(frozen=True)
class FaceSubset:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise GeometryError("face subset must be nonempty")
        if idx[0] < 0:
            raise GeometryError(f"negative face index in {idx}")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def check(self, m: int) -> "FaceSubset":
        if self.indices[-1] >= m:
            raise GeometryError(f"face index {self.indices[-1]} out of range for {m} faces")
        return self


@dataclass(frozen=True)
class PolyhedralDomain:
    dimension: int
    faces: tuple[Face, ...]
    interior_point: np.ndarray = field(init=False, repr=False, compare=False)
    margin: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))
        if self.dimension < 1:
            raise GeometryError("dimension must be positive")
        if not self.faces:
            raise GeometryError("domain needs at least one face")
        for f in self.faces:
            if len(f.normal) != self.dimension:
                raise GeometryError(
                    f"face {f.label!r} has normal of length {len(f.normal)}, expected {self.dimension}"
                )
        N = self.normals
        for i in range(len(N)):
            for j in range(i):
                if np.max(np.abs(N[i] - N[j])) <= 1e-12:
                    raise GeometryError(f"faces {j} and {i} share the same normal")
        x0, t = _max_margin_point(N, self.offsets)
        if not t > MARGIN_TOL:
            raise GeometryError(f"domain has empty interior (best margin {t:.3g})")
        object.__setattr__(self, "interior_point", x0)
        object.__setattr__(self, "margin", t)

    @property
    def m(self) -> int:
        return len(self.faces)

    @property
    def normals(self) -> np.ndarray:
        try:
            return self.__dict__["_N"]
        except KeyError:
            N = np.array([f.normal for f in self.faces], dtype=float)
            N.setflags(write=False)
            self.__dict__["_N"] = N
            return N

    @property
    def offsets(self) -> np.ndarray:
        try:
            return self.__dict__["_a"]
        except KeyError:
            a = np.array([f.offset for f in self.faces], dtype=float)
            a.setflags(write=False)
            self.__dict__["_a"] = a
            return a

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dimension,):
            raise GeometryError(f"point has shape {x.shape}, expected (..., {self.dimension})")
        return x

    def gap(self, x, i: int) -> float:
        x = self._point(x)
        if not 0 <= i < self.m:
            raise GeometryError(f"face index {i} out of range for {self.m} faces")
        return float(x @ self.normals[i] - self.offsets[i])

    def gaps(self, x) -> np.ndarray:
        """All gaps; works on a single point or a stack of points."""
        return self._point(x) @ self.normals.T - self.offsets

    def active_set(self, x, eps: float = 0.0) -> FaceSubset | None:
        g = self.gaps(x)
        idx = np.flatnonzero(g <= eps)
        return FaceSubset(tuple(idx)) if idx.size else None

    def contains(self, x, tol: float = 1e-10) -> bool:
        return bool(np.all(self.gaps(x) >= -tol))

    @property
    def facets(self) -> np.ndarray:
        """Mask of faces whose hyperplane meets the closure in a (d-1)-dimensional set.

        A face is redundant when the other faces already imply its inequality;
        its hyperplane then touches the closed domain only where other faces
        are tight as well.
        """
        try:
            return self.__dict__["_facets"]
        except KeyError:
            pass
        N, a = self.normals, self.offsets
        mask = np.ones(self.m, dtype=bool)
        for i in range(self.m):
            others = [j for j in range(self.m) if j != i]
            if not others:
                break
            res = linprog(N[i], A_ub=-N[others], b_ub=-a[others],
                          bounds=[(None, None)] * self.dimension, method="highs")
            if res.status == 0 and res.fun >= a[i] - 1e-9 * (1 + abs(a[i])):
                mask[i] = False
        mask.setflags(write=False)
        self.__dict__["_facets"] = mask
        return mask

    def project(self, x) -> np.ndarray:
        return self.project_with_multipliers(x)[0]

    def project_with_multipliers(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Closest point of the closed domain and the normal-cone coefficients.

        Returns ``(y, mu)`` with ``y - x = sum_i mu_i n_i``, ``mu >= 0`` and
        ``mu_i > 0`` only on faces tight at ``y``.
        """
        x = self._point(x).copy()
        N, a = self.normals, self.offsets
        h = a - N @ x
        if np.all(h <= 0):
            return x, np.zeros(self.m)
        y, mu = _least_distance(N, h)
        y = x + y
        # polish on the active set; keeps idempotence and feasibility at round-off level
        act = np.flatnonzero((mu > 0) | (N @ y - a <= 1e-12 * (1 + np.abs(a))))
        if act.size:
            Na = N[act]
            sol, *_ = np.linalg.lstsq(Na @ Na.T, a[act] - Na @ x, rcond=None)
            cand = x + Na.T @ sol
            if np.all(sol >= -1e-12) and np.all(N @ cand - a >= -1e-13 * (1 + np.abs(a))):
                full = np.zeros(self.m)
                full[act] = np.maximum(sol, 0.0)
                y, mu = cand, full
        g = N @ y - a
        if np.min(g) < -1e-10 * (1 + np.max(np.abs(x))):
            raise ProjectionError(f"projection left the domain (min gap {np.min(g):.3g})")
        return y, mu

    def subset_projector(self, J: FaceSubset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(N_J, a_J, pinv(N_J))``; raises if the tight set of ``J`` is empty."""
        J.check(self.m)
        idx = list(J.indices)
        NJ, aJ = self.normals[idx], self.offsets[idx]
        P = np.linalg.pinv(NJ)
        z0 = P @ aJ
        resid = np.linalg.norm(NJ @ z0 - aJ)
        if resid > 1e-9 * (1 + np.linalg.norm(aJ)):
            raise EmptyIntersectionError(
                f"faces {idx} have no common tight point (residual {resid:.3g})"
            )
        return NJ, aJ, P

    def subset_distance(self, x, J: FaceSubset) -> float | np.ndarray:
        """Euclidean distance from ``x`` to ``{z : z . n_j = a_j, j in J}``."""
        x = self._point(x)
        NJ, aJ, P = self.subset_projector(J)
        d = np.linalg.norm((x @ NJ.T - aJ) @ P.T, axis=-1)
        return float(d) if np.ndim(d) == 0 else d


def _max_margin_point(N: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, float]:
    """Maximize the smallest gap (capped at 1) with an LP."""
    m, d = N.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A = np.hstack([-N, np.ones((m, 1))])
    bounds = [(None, None)] * d + [(None, 1.0)]
    res = linprog(c, A_ub=A, b_ub=-a, bounds=bounds, method="highs")
    if res.status != 0:
        raise GeometryError(f"feasibility LP failed: {res.message}")
    return res.x[:d], float(res.x[-1])


def _least_distance(G: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """min |w| subject to G w >= h, through the dual NNLS problem.

    Uses the classical reduction: with ``E = [G^T; h^T]`` and ``f = e_{d+1}``,
    solve ``min |E u - f|, u >= 0``; then ``w = -r[:d] / r[d]`` for the
    residual ``r = E u - f`` and the multipliers are ``u / (-r[d])``.
    """
    m, d = G.shape
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(d + 1)
    f[-1] = 1.0
    # bounded-variable least squares; plain NNLS can stop at a non-optimal point here
    u = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x
    r = E @ u - f
    if abs(r[-1]) < 1e-14:
        raise ProjectionError("least-distance problem is infeasible")
    w = -r[:d] / r[-1]
    mu = u / (-r[-1])
    return w, mu


def domain_from_arrays(normals: Sequence[Sequence[float]], offsets: Iterable[float],
                       potential_ids: Sequence[str] | None = None,
                       labels: Sequence[str] | None = None) -> PolyhedralDomain:
    normals = [list(map(float, n)) for n in normals]
    offsets = list(offsets)
    ids = potential_ids or [f"p{i}" for i in range(len(normals))]
    labels = labels or [f"face{i}" for i in range(len(normals))]
    faces = tuple(Face(tuple(n), a, pid, lab) for n, a, pid, lab in zip(normals, offsets, ids, labels))
    return PolyhedralDomain(len(normals[0]), faces)
