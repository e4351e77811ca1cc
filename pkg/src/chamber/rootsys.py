"""Finite root systems, reflections and Weyl chambers (families A, B, D, I2)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-10


class RootSystemError(ValueError):
    pass


def reflect(alpha, x) -> np.ndarray:
    """Orthogonal reflection of ``x`` across the hyperplane perpendicular to ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    nn = float(alpha @ alpha)
    if nn == 0.0:
        raise RootSystemError("cannot reflect across a zero vector")
    return x - (2.0 * (x @ alpha) / nn)[..., None] * alpha if x.ndim > 1 else x - 2.0 * (x @ alpha) / nn * alpha


@dataclass
class RootSystem:
    """Roots as rows of ``roots``; ``positive``/``simple`` index into them.

    ``k`` holds one multiplicity per root. ``witness`` is a vector off every
    root hyperplane whose half-space selects the positive roots.
    """

    roots: np.ndarray
    positive: tuple[int, ...]
    simple: tuple[int, ...]
    k: np.ndarray
    witness: np.ndarray
    name: str = "custom"
    crystallographic: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.roots.shape[1]

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.roots, tol=1e-9))

    def index_of(self, v) -> int:
        d = np.max(np.abs(self.roots - np.asarray(v, dtype=float)), axis=1)
        i = int(np.argmin(d))
        return i if d[i] <= TOL else -1

    def orbits(self) -> list[list[int]]:
        """Orbits of the roots under the group generated by the reflections."""
        seen: set[int] = set()
        out = []
        for start in range(len(self.roots)):
            if start in seen:
                continue
            orbit = {start}
            frontier = [start]
            while frontier:
                i = frontier.pop()
                for beta in self.roots:
                    j = self.index_of(reflect(beta, self.roots[i]))
                    if j >= 0 and j not in orbit:
                        orbit.add(j)
                        frontier.append(j)
            seen |= orbit
            out.append(sorted(orbit))
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "roots": self.roots.tolist(),
            "positive": list(self.positive),
            "simple": list(self.simple),
            "k": self.k.tolist(),
            "witness": self.witness.tolist(),
            "crystallographic": self.crystallographic,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RootSystem":
        roots = np.asarray(d["roots"], dtype=float)
        positive = tuple(d.get("positive") or np.flatnonzero(roots @ np.asarray(d["witness"], float) > 0))
        simple = tuple(d["simple"]) if "simple" in d else simple_roots(roots, positive)
        return cls(roots, positive, simple, np.asarray(d["k"], dtype=float),
                   np.asarray(d["witness"], dtype=float), d.get("name", "custom"),
                   bool(d.get("crystallographic", False)))


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str]
    n_positive: int
    n_simple: int
    n_orbits: int

    def __str__(self):
        head = f"{'VALID' if self.ok else 'INVALID'}: |R+|={self.n_positive} |S|={self.n_simple} orbits={self.n_orbits}"
        return "\n".join([head] + [f"  - {f}" for f in self.failures])


def _in_cone(target: np.ndarray, gens: np.ndarray) -> bool:
    """Is ``target`` a positive combination of two of the rows of ``gens``?"""
    for u, v in itertools.combinations(gens, 2):
        A = np.stack([u, v], axis=1)
        c, *_ = np.linalg.lstsq(A, target, rcond=None)
        if np.linalg.norm(A @ c - target) <= 1e-9 and np.all(c > 1e-9):
            return True
    return False


def simple_roots(roots: np.ndarray, positive) -> tuple[int, ...]:
    """Positive roots that are not a positive combination of two other positive roots."""
    roots = np.asarray(roots, dtype=float)
    out = []
    for i in positive:
        others = roots[[j for j in positive if j != i]]
        if not _in_cone(roots[i], others):
            out.append(int(i))
    return tuple(out)


def validate(rs: RootSystem) -> ValidationReport:
    failures = []
    R = rs.roots
    n = len(R)
    if n == 0:
        failures.append("empty root set")
    if np.any(np.linalg.norm(R, axis=1) <= TOL):
        failures.append("zero vector in root set")
    # R meets each line R*alpha exactly in {alpha, -alpha}
    for i in range(n):
        a = R[i]
        for j in range(n):
            if i == j:
                continue
            b = R[j]
            cross = np.linalg.norm(b * (a @ a) - a * (a @ b))
            if cross <= TOL * (a @ a) * max(1.0, np.linalg.norm(b)):
                t = (a @ b) / (a @ a)
                if abs(t + 1) > TOL:
                    failures.append(f"roots {i} and {j} are proportional with ratio {t:.6g}")
        if rs.index_of(-a) < 0:
            failures.append(f"-root {i} missing (line axiom)")
    # closure under every reflection
    for i in range(n):
        for j in range(n):
            if rs.index_of(reflect(R[i], R[j])) < 0:
                failures.append(f"s_{i}(root {j}) is not a root (closure axiom)")
                break
    # positivity witness
    w = rs.witness
    proj = R @ w
    if np.any(np.abs(proj) <= TOL):
        failures.append("witness lies on a root hyperplane")
    expected = tuple(int(i) for i in np.flatnonzero(proj > 0))
    if tuple(sorted(rs.positive)) != expected:
        failures.append("positive roots do not match the witness half-space")
    # simple roots: basis of span(R), every positive root a nonnegative combination
    S = R[list(rs.simple)] if rs.simple else np.zeros((0, R.shape[1]))
    rank = np.linalg.matrix_rank(R, tol=1e-9) if n else 0
    if len(rs.simple) != rank or np.linalg.matrix_rank(S, tol=1e-9) != rank:
        failures.append(f"simple roots ({len(rs.simple)}) are not a basis of span(R) (rank {rank})")
    elif n:
        for i in rs.positive:
            c, *_ = np.linalg.lstsq(S.T, R[i], rcond=None)
            if np.linalg.norm(S.T @ c - R[i]) > 1e-8:
                failures.append(f"positive root {i} not in span of simple roots")
            elif np.any(c < -1e-9):
                failures.append(f"positive root {i} has a negative simple coordinate")
            elif rs.crystallographic and np.any(np.abs(c - np.round(c)) > 1e-8):
                failures.append(f"positive root {i} has non-integer simple coordinates")
    # multiplicity invariance
    orbits = rs.orbits() if n else []
    if len(rs.k) != n:
        failures.append(f"multiplicity has {len(rs.k)} entries for {n} roots")
    else:
        for i in range(n):
            for beta in R:
                j = rs.index_of(reflect(beta, R[i]))
                if j >= 0 and abs(rs.k[j] - rs.k[i]) > TOL:
                    failures.append(f"k not invariant: k[{i}]={rs.k[i]} but k[{j}]={rs.k[j]}")
                    break
    return ValidationReport(not failures, failures, len(rs.positive), len(rs.simple), len(orbits))


def _assemble(name, roots, witness, k_values, crystallographic) -> RootSystem:
    roots = np.asarray(roots, dtype=float)
    witness = np.asarray(witness, dtype=float)
    positive = tuple(int(i) for i in np.flatnonzero(roots @ witness > 0))
    rs = RootSystem(roots, positive, simple_roots(roots, positive), np.zeros(len(roots)),
                    witness, name, crystallographic)
    orbits = rs.orbits()
    # canonical order: orbit of the first simple root first
    orbits.sort(key=lambda o: min(rs.simple.index(i) if i in rs.simple else len(roots) for i in o))
    k_values = list(k_values)
    if len(k_values) == 1:
        # one value: the same multiplicity on every orbit
        k_values = k_values * len(orbits)
    if len(k_values) != len(orbits):
        raise RootSystemError(
            f"{name} has {len(orbits)} root orbit(s); got {len(k_values)} multiplicity value(s)"
        )
    k = np.zeros(len(roots))
    for o, kv in zip(orbits, k_values):
        k[o] = float(kv)
    rs.k = k
    rs.meta["orbits"] = orbits
    return rs


def _tag(rs: RootSystem, family: str, rank: int, k_values) -> RootSystem:
    rs.meta.update(family=family, rank=rank, k_values=[float(v) for v in k_values])
    return rs


def standard_root_system(family: str, rank: int, k_values) -> RootSystem:
    """Standard realization of A_n (in R^{n+1}), B_n, D_n (in R^n) and I2(m) (in R^2).

    For I2 the integer argument is ``m``. ``k_values`` gives one multiplicity per
    root orbit, ordered starting with the orbit that contains the first simple
    root: for B_n that is the long roots ``e_i - e_j`` then the short roots
    ``e_i``; for even ``m`` in I2 the two alternating classes of lines.
    """
    family = family.upper()
    k_values = list(np.atleast_1d(np.asarray(k_values, dtype=float)))
    if family == "A":
        if rank < 1:
            raise RootSystemError("A_n needs n >= 1")
        n = rank + 1
        e = np.eye(n)
        roots = [e[i] - e[j] for i in range(n) for j in range(n) if i != j]
        witness = np.arange(n, 0, -1, dtype=float)
        return _tag(_assemble(f"A{rank}", roots, witness, k_values, True), family, rank, k_values)
    if family in ("B", "D"):
        if rank < 2:
            raise RootSystemError(f"{family}_n needs n >= 2")
        n = rank
        e = np.eye(n)
        roots = []
        for i in range(n):
            for j in range(i + 1, n):
                for si in (1, -1):
                    for sj in (1, -1):
                        roots.append(si * e[i] + sj * e[j])
        if family == "B":
            roots += [e[i] for i in range(n)] + [-e[i] for i in range(n)]
        witness = np.arange(n, 0, -1, dtype=float) + 0.5 ** np.arange(1, n + 1)
        return _tag(_assemble(f"{family}{rank}", roots, witness, k_values, True), family, rank, k_values)
    if family == "I2":
        m = rank
        if m < 3:
            raise RootSystemError("I2(m) needs m >= 3")
        ang = np.pi * np.arange(2 * m) / m
        roots = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        roots[np.abs(roots) < 1e-15] = 0.0
        th = np.pi / 2 - np.pi / (2 * m)
        witness = np.array([math.cos(th), math.sin(th)])
        return _tag(_assemble(f"I2({m})", roots, witness, k_values, m == 3), family, rank, k_values)
    raise RootSystemError(f"unknown family {family!r}")


def orbit_count(family: str, rank: int) -> int:
    family = family.upper()
    if family == "B" or (family == "I2" and rank % 2 == 0):
        return 2
    return 1


def dunkl_model(rs: RootSystem, initial_point=None):
    """Radial Dunkl process in the positive Weyl chamber as a barrier model.

    One face per positive root ``alpha`` with unit normal ``alpha/|alpha|`` and
    barrier ``-k(alpha) log u``, so the drift is
    ``sum_{alpha > 0} k(alpha) alpha / (alpha . x)``. Non-simple roots are kept
    as (geometrically redundant) faces so their walls can be monitored.
    The default start has every simple-root gap equal to 1/2.
    """
    from .geometry import Face, PolyhedralDomain
    from .models import PolyhedralModel
    from .potentials import LogBarrier

    R = rs.roots
    if np.any(rs.k[list(rs.positive)] <= 0):
        raise RootSystemError("radial Dunkl model needs k > 0 on every positive root")
    potentials = {}
    faces = []
    simple = set(rs.simple)
    notes = {}
    for t, i in enumerate(rs.positive):
        kval = float(rs.k[i])
        pid = f"k={kval!r}"
        potentials[pid] = LogBarrier(kval)
        alpha = R[i]
        label = _root_label(alpha)
        faces.append(Face(tuple(alpha / np.linalg.norm(alpha)), 0.0, pid, label))
        if i not in simple:
            notes[t] = "non-simple root: its wall meets the chamber closure only on edges of simple walls"
    domain = PolyhedralDomain(rs.dimension, tuple(faces))
    face_of = {i: t for t, i in enumerate(rs.positive)}
    simple_faces = [face_of[i] for i in rs.simple]
    edges = tuple((a, b) for a, b in itertools.combinations(simple_faces, 2))
    if initial_point is None:
        S = R[list(rs.simple)]
        Sn = S / np.linalg.norm(S, axis=1)[:, None]
        initial_point, *_ = np.linalg.lstsq(Sn, np.full(len(S), 0.5), rcond=None)
    fam = rs.name
    return PolyhedralModel(domain, potentials, np.asarray(initial_point, float), f"dunkl({fam})",
                           edges, notes, {"kind": "dunkl", "family": rs.meta.get("family", fam),
                                          "rank": rs.meta.get("rank"), "k": rs.meta.get("k_values")})


def _root_label(alpha) -> str:
    a = np.asarray(alpha, dtype=float)
    if np.allclose(a, np.round(a), atol=1e-12):
        parts = []
        for i, c in enumerate(np.round(a).astype(int)):
            if c == 0:
                continue
            sign = "-" if c < 0 else ("+" if parts else "")
            mag = "" if abs(c) == 1 else str(abs(c))
            parts.append(f"{sign}{mag}e{i + 1}")
        return "".join(parts)
    return "(" + ",".join(f"{v:.3f}" for v in a) + ")"
