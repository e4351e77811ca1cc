"""Model zoo: interacting particle systems as polyhedral barrier models.

Each builder returns a :class:`PolyhedralModel`: a polyhedral domain, one
barrier potential per face (through a small registry), a canonical interior
starting point and the face subsets (edges) worth monitoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Face, FaceSubset, GeometryError, PolyhedralDomain
from .potentials import (
    BarrierPotential,
    HyperbolicLogSinh,
    LogBarrier,
    Scaled,
    TrigLogSin,
    Zero,
    potential_from_spec,
)

SQRT2 = math.sqrt(2.0)
INTERIOR_TOL = 1e-9


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PolyhedralModel:
    domain: PolyhedralDomain
    potentials: dict
    initial_point: np.ndarray
    name: str
    monitored_subsets: tuple = ()
    face_notes: dict = field(default_factory=dict)
    spec: dict | None = None

    def __post_init__(self):
        x0 = np.asarray(self.initial_point, dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, "initial_point", x0)
        object.__setattr__(self, "monitored_subsets",
                           tuple(FaceSubset(tuple(J)) if not isinstance(J, FaceSubset) else J
                                 for J in self.monitored_subsets))
        for f in self.domain.faces:
            if f.potential_id not in self.potentials:
                raise ModelError(f"face {f.label!r} refers to unknown potential {f.potential_id!r}")
        if x0.shape != (self.domain.dimension,):
            raise ModelError(f"initial point has shape {x0.shape}, expected ({self.domain.dimension},)")
        # a reflecting face (finite phi(0)) may hold the start; a barrier face may not
        gaps0 = self.domain.gaps(x0)
        need = np.array([INTERIOR_TOL if math.isinf(p.value_at_zero) else -1e-12 for p in self.face_potentials])
        bad = gaps0 < need
        if np.any(bad):
            raise ModelError(f"initial point is not admissible (min gap {float(np.min(gaps0[bad])):.3g})")
        for pot, g in zip(self.face_potentials, self.domain.gaps(x0)):
            if not np.isfinite(pot.value(g)):
                raise ModelError("potential is infinite at the initial point")
        for J in self.monitored_subsets:
            J.check(self.domain.m)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def face_potentials(self) -> list[BarrierPotential]:
        return [self.potentials[f.potential_id] for f in self.domain.faces]

    @property
    def labels(self) -> list[str]:
        return [f.label for f in self.domain.faces]

    def energy(self, x) -> float:
        """Phi(x) = sum_i phi_i(x . n_i - a_i); +inf outside the closed domain."""
        g = self.domain.gaps(x)
        if np.any(g < 0):
            return math.inf
        return float(sum(p.value(gi) for p, gi in zip(self.face_potentials, g)))

    def gradient(self, x) -> np.ndarray:
        """grad Phi(x) = sum_i n_i phi_i'(gap_i); requires every gap > 0."""
        x = np.asarray(x, dtype=float)
        g = self.domain.gaps(x)
        if np.any(g <= 0):
            from .potentials import PotentialDomainError

            raise PotentialDomainError("drift evaluated on or outside a wall")
        slopes = np.stack([p.derivative(g[..., i]) for i, p in enumerate(self.face_potentials)], axis=-1)
        return slopes @ self.domain.normals

    def drift(self, x) -> np.ndarray:
        return -self.gradient(x)

    def with_initial_point(self, x0) -> "PolyhedralModel":
        return PolyhedralModel(self.domain, self.potentials, np.asarray(x0, float), self.name,
                               self.monitored_subsets, self.face_notes,
                               None if self.spec is None else {**self.spec, "initial_point": list(map(float, x0))})

    def to_spec(self) -> dict:
        """Explicit (custom-kind) config that rebuilds an identical model."""
        return {
            "kind": "custom",
            "name": self.name,
            "dimension": self.dimension,
            "faces": [
                {"normal": list(f.normal), "offset": f.offset, "label": f.label,
                 "potential": self.potentials[f.potential_id].to_spec(), "potential_id": f.potential_id}
                for f in self.domain.faces
            ],
            "initial_point": self.initial_point.tolist(),
            "monitored_subsets": [list(J.indices) for J in self.monitored_subsets],
            "face_notes": {str(k): v for k, v in self.face_notes.items()},
        }


def _unit(v) -> tuple[float, ...]:
    v = np.asarray(v, dtype=float)
    return tuple(v / np.linalg.norm(v))


def build_rost_vares(n: int, phi: BarrierPotential, initial_point=None) -> PolyhedralModel:
    """Nearest-neighbour repulsion: x_1 < ... < x_n, pair potential phi(x_{i+1} - x_i)."""
    if n < 2:
        raise ModelError("Rost-Vares model needs n >= 2 particles")
    e = np.eye(n)
    faces = tuple(Face(_unit(e[i + 1] - e[i]), 0.0, "phi", f"x{i + 2}-x{i + 1}") for i in range(n - 1))
    x0 = np.arange(n, dtype=float) if initial_point is None else initial_point
    edges = tuple((i, i + 1) for i in range(n - 2))
    spec = {"kind": "rost_vares", "n": n, "phi": _spec_or_none(phi)}
    return PolyhedralModel(PolyhedralDomain(n, faces), {"phi": Scaled(phi, SQRT2)}, x0,
                           f"rost_vares(n={n})", edges, {}, spec)


def build_wishart_radii(n: int, delta: float, initial_point=None) -> PolyhedralModel:
    """Square roots of Wishart eigenvalues, 0 < r_1 < ... < r_n.

    Axis walls ``r_i = 0`` carry ``-(delta - n)/2 log r_i`` (pure reflection when
    ``delta == n``); difference and sum walls carry ``-1/2 log`` barriers.
    """
    if n < 2:
        raise ModelError("Wishart radii model needs n >= 2")
    if delta < n:
        raise ModelError(f"Wishart radii model needs delta >= n, got delta={delta} < n={n}")
    e = np.eye(n)
    axis = Zero() if delta == n else LogBarrier((delta - n) / 2.0)
    faces = [Face(tuple(e[i]), 0.0, "axis", f"r{i + 1}") for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    faces += [Face(_unit(e[j] - e[i]), 0.0, "pair", f"r{j + 1}-r{i + 1}") for i, j in pairs]
    faces += [Face(_unit(e[j] + e[i]), 0.0, "pair", f"r{j + 1}+r{i + 1}") for i, j in pairs]
    x0 = np.arange(1, n + 1, dtype=float) if initial_point is None else initial_point
    # edges of the chamber r_1 = 0, r_1 = r_2, ..., taken pairwise in order
    diff_index = {p: n + k for k, p in enumerate(pairs)}
    walls = [0] + [diff_index[(i, i + 1)] for i in range(n - 1)]
    edges = tuple((walls[i], walls[i + 1]) for i in range(len(walls) - 1))
    return PolyhedralModel(PolyhedralDomain(n, tuple(faces)), {"axis": axis, "pair": LogBarrier(0.5)},
                           x0, f"wishart(n={n}, delta={delta})", edges, {},
                           {"kind": "wishart", "n": n, "delta": delta})


def eigenvalues_from_radii(r) -> np.ndarray:
    return np.asarray(r, dtype=float) ** 2


def build_trigonometric(n: int, gamma: float, initial_point=None) -> PolyhedralModel:
    """Particles on a circle with pair potential -gamma log sin((x_i - x_j)/2).

    Each pair contributes two faces: the collision wall ``x_i = x_j`` and the
    wrap-around wall ``x_i = x_j + 2 pi``. Using
    ``sin(t) = 2 sin(t/2) cos(t/2)``, the pair potential splits exactly into one
    ``-gamma log sin(u / (2 sqrt 2))`` term per face (up to a constant), so each
    face is singular only on its own wall and the total drift is
    ``(gamma/2) sum_k cot((x_j - x_k)/2)``.
    """
    if n < 2:
        raise ModelError("trigonometric model needs n >= 2")
    if not gamma > 0:
        raise ModelError("trigonometric model needs gamma > 0")
    e = np.eye(n)
    faces = []
    for i in range(n):
        for j in range(i):
            faces.append(Face(_unit(e[i] - e[j]), 0.0, "trig", f"x{i + 1}-x{j + 1}"))
    for i in range(n):
        for j in range(i):
            faces.append(Face(_unit(e[j] - e[i]), -math.pi * SQRT2, "trig", f"x{j + 1}-x{i + 1}+2pi"))
    x0 = 2 * math.pi * np.arange(n) / n if initial_point is None else initial_point
    index = {(i, j): k for k, (i, j) in enumerate((i, j) for i in range(n) for j in range(i))}
    edges = tuple((index[(i + 1, i)], index[(i + 2, i + 1)]) for i in range(n - 2))
    pot = TrigLogSin(gamma, 2 * SQRT2)
    return PolyhedralModel(PolyhedralDomain(n, tuple(faces)), {"trig": pot}, x0,
                           f"trigonometric(n={n}, gamma={gamma})", edges, {},
                           {"kind": "trig", "n": n, "gamma": gamma})


def build_hyperbolic(n: int, gamma: float, initial_point=None) -> PolyhedralModel:
    """Pair potential -gamma log sinh(x_k - x_j) on x_1 < ... < x_n."""
    if n < 2:
        raise ModelError("hyperbolic model needs n >= 2")
    if not gamma > 0:
        raise ModelError("hyperbolic model needs gamma > 0")
    e = np.eye(n)
    faces = tuple(Face(_unit(e[k] - e[j]), 0.0, "hyp", f"x{k + 1}-x{j + 1}")
                  for j in range(n) for k in range(j + 1, n))
    index = {(j, k): t for t, (j, k) in enumerate((j, k) for j in range(n) for k in range(j + 1, n))}
    edges = tuple((index[(i, i + 1)], index[(i + 1, i + 2)]) for i in range(n - 2))
    x0 = np.arange(n, dtype=float) if initial_point is None else initial_point
    return PolyhedralModel(PolyhedralDomain(n, faces), {"hyp": HyperbolicLogSinh(gamma)}, x0,
                           f"hyperbolic(n={n}, gamma={gamma})", edges, {},
                           {"kind": "hyperbolic", "n": n, "gamma": gamma})


def build_custom(config: dict) -> PolyhedralModel:
    """Model from explicit faces.

    ``{"dimension": d, "faces": [{"normal", "offset", "potential", "label"}...],
    "initial_point": [...], "normalize": false, "monitored_subsets": [[i, j], ...]}``

    With ``normalize`` a non-unit normal ``n`` is replaced by ``n/|n|``, the
    offset by ``a/|n|`` and the potential by ``u -> phi(|n| u)``, which keeps
    ``phi(x . n - a)`` unchanged.
    """
    try:
        faces_cfg = config["faces"]
        x0 = config["initial_point"]
    except KeyError as exc:
        raise ModelError(f"custom model is missing {exc.args[0]!r}") from None
    normalize = bool(config.get("normalize", False))
    dim = int(config.get("dimension", len(faces_cfg[0]["normal"])))
    potentials: dict = {}
    faces = []
    for i, fc in enumerate(faces_cfg):
        normal = np.asarray(fc["normal"], dtype=float)
        offset = float(fc.get("offset", 0.0))
        pot = potential_from_spec(fc.get("potential", {"kind": "zero"}))
        pid = fc.get("potential_id", f"p{i}")
        norm = float(np.linalg.norm(normal))
        if normalize and abs(norm - 1.0) > 1e-12:
            normal, offset = normal / norm, offset / norm
            pot = Scaled(pot, norm)
            pid = f"{pid}*{norm!r}"
        if pid in potentials and potentials[pid] != pot:
            raise ModelError(f"potential id {pid!r} bound to two different potentials")
        potentials[pid] = pot
        faces.append(Face(tuple(normal), offset, pid, fc.get("label", f"face{i}")))
    domain = PolyhedralDomain(dim, tuple(faces))
    notes = {int(k): v for k, v in config.get("face_notes", {}).items()}
    return PolyhedralModel(domain, potentials, np.asarray(x0, float), config.get("name", "custom"),
                           tuple(tuple(J) for J in config.get("monitored_subsets", ())), notes,
                           dict(config, kind="custom"))


def _spec_or_none(p: BarrierPotential):
    try:
        return p.to_spec()
    except TypeError:
        return None


ZOO_KINDS = ("rost_vares", "wishart", "dunkl", "trig", "hyperbolic", "custom")


def build_model(spec: dict) -> PolyhedralModel:
    """Build any zoo model from its config dict (see ``ZOO_KINDS``)."""
    kind = spec.get("kind")
    x0 = spec.get("initial_point")
    try:
        if kind == "rost_vares":
            m = build_rost_vares(int(spec["n"]), potential_from_spec(spec["phi"]))
        elif kind == "wishart":
            m = build_wishart_radii(int(spec["n"]), float(spec["delta"]))
        elif kind == "trig":
            m = build_trigonometric(int(spec["n"]), float(spec["gamma"]))
        elif kind == "hyperbolic":
            m = build_hyperbolic(int(spec["n"]), float(spec["gamma"]))
        elif kind == "dunkl":
            from .rootsys import dunkl_model, standard_root_system

            m = dunkl_model(standard_root_system(spec["family"], int(spec["rank"]), spec["k"]))
        elif kind == "custom":
            return build_custom(spec)
        else:
            raise ModelError(f"unknown model kind {kind!r}; expected one of {ZOO_KINDS}")
    except KeyError as exc:
        raise ModelError(f"model spec for {kind!r} is missing {exc.args[0]!r}") from None
    except GeometryError as exc:
        raise ModelError(str(exc)) from None
    if x0 is not None:
        m = m.with_initial_point(x0)
    return m
