"""Ensembles: hitting fractions, min-gap distributions, local-time and moment estimates.

Trajectories run in fixed batches of ``BATCH`` consecutive indices, so the
result does not depend on how many workers execute them or in what order.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .classifier import Repulsion, classify
from .geometry import FaceSubset, GeometryError
from .integrator import SimConfig, SimulationError, simulate_batch
from .models import PolyhedralModel

BATCH = 256
Z95 = float(norm.ppf(0.975))


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("Wilson interval needs n >= 1")
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def n_threads() -> int:
    env = os.environ.get("CHAMBER_THREADS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ValueError(f"CHAMBER_THREADS must be a positive integer, got {env!r}") from None
        if v < 1:
            raise ValueError("CHAMBER_THREADS must be >= 1")
        return v
    return os.cpu_count() or 1


@dataclass
class EnsembleData:
    """Per-trajectory summaries stacked along axis 0, in trajectory order."""

    min_gaps: np.ndarray
    local_time: np.ndarray
    first_hit: np.ndarray
    hit_exclusive: np.ndarray
    bridge_hit: np.ndarray
    subset_first_hit: np.ndarray
    subset_min_distance: np.ndarray
    phi_prime_integral: np.ndarray
    occupation: np.ndarray
    steps: np.ndarray
    termination: np.ndarray
    final_state: np.ndarray
    refinements: np.ndarray

    @property
    def n(self) -> int:
        return len(self.steps)

    def hit_at(self, eps: float) -> np.ndarray:
        """Face hits when the threshold is ``eps`` (bridge crossings always count)."""
        return self.bridge_hit | (self.min_gaps <= eps)

    def subset_hit_at(self, eps: float) -> np.ndarray:
        return self.subset_min_distance <= eps


_FIELDS = ("min_gaps", "local_time", "first_hit", "hit_exclusive", "bridge_hit", "subset_first_hit",
           "subset_min_distance", "phi_prime_integral", "occupation", "steps", "term", "x", "refinements")


def _batch_arrays(model, cfg, ids):
    b = simulate_batch(model, cfg, ids)
    return (b.min_gaps, b.L, b.first_hit, b.exclusive, b.bridge_hit, b.sub_first, b.sub_min,
            b.phi_int, b.occ, b.steps, b.term, b.x, b.refinements)


def simulate_ensemble(model: PolyhedralModel, cfg: SimConfig, n: int, threads: int | None = None) -> EnsembleData:
    if n < 1:
        raise ValueError(f"ensemble size must be >= 1, got {n}")
    chunks = [list(range(s, min(n, s + BATCH))) for s in range(0, n, BATCH)]
    workers = min(threads or n_threads(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda ids: _batch_arrays(model, cfg, ids), chunks))
    else:
        parts = [_batch_arrays(model, cfg, ids) for ids in chunks]
    cols = [np.concatenate([p[k] for p in parts], axis=0) for k in range(len(_FIELDS))]
    return EnsembleData(*cols)


def _quantiles(v: np.ndarray, qs=(0.01, 0.5)) -> list[float]:
    return [float(np.quantile(v, q)) for q in qs]


@dataclass
class FaceStats:
    label: str
    hit_fraction: float
    ci: tuple[float, float]
    exclusive_fraction: float
    bridge_fraction: float
    min_gap_q01: float
    min_gap_q50: float
    local_time_mean: float
    local_time_stderr: float
    phi_prime_integral_mean: float
    boundary_class: str
    note: str = ""


@dataclass
class SubsetStats:
    faces: tuple[int, ...]
    hit_fraction: float
    ci: tuple[float, float]
    min_distance_q01: float
    min_distance_q50: float


@dataclass
class EnsembleReport:
    n: int
    faces: list
    subsets: list
    any_face_fraction: float
    any_face_ci: tuple[float, float]
    moments: dict
    occupation: dict
    config: dict
    model: dict
    wall_clock: float
    terminations: dict
    refinements: int
    data: EnsembleData | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "faces": [vars(f) | {"ci": list(f.ci)} for f in self.faces],
            "subsets": [vars(s) | {"faces": list(s.faces), "ci": list(s.ci)} for s in self.subsets],
            "any_face_fraction": self.any_face_fraction,
            "any_face_ci": list(self.any_face_ci),
            "moments": self.moments,
            "occupation": self.occupation,
            "config": self.config,
            "model": self.model,
            "wall_clock": self.wall_clock,
            "terminations": self.terminations,
            "refinements": self.refinements,
        }


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return float(v.mean()), se


def summarize(model: PolyhedralModel, cfg: SimConfig, data: EnsembleData, wall_clock: float = 0.0) -> EnsembleReport:
    n = data.n
    hits = data.hit_at(cfg.hit_eps)
    faces = []
    for i, f in enumerate(model.domain.faces):
        k = int(hits[:, i].sum())
        lt = _mean_se(data.local_time[:, i])
        q01, q50 = _quantiles(data.min_gaps[:, i])
        faces.append(FaceStats(
            f.label, k / n, wilson_interval(k, n),
            float((hits[:, i] & data.hit_exclusive[:, i]).sum()) / n,
            float(data.bridge_hit[:, i].sum()) / n,
            q01, q50, lt[0], lt[1],
            float(data.phi_prime_integral[:, i].mean()),
            classify(model.potentials[f.potential_id]).kind.value,
            model.face_notes.get(i, ""),
        ))
    subsets = []
    shits = data.subset_hit_at(cfg.edge_eps)
    for k, J in enumerate(model.monitored_subsets):
        c = int(shits[:, k].sum())
        q01, q50 = _quantiles(data.subset_min_distance[:, k])
        subsets.append(SubsetStats(J.indices, c / n, wilson_interval(c, n), q01, q50))
    anyk = int(hits.any(axis=1).sum())
    x = data.final_state
    sq = (x * x).sum(axis=1)
    moments = {
        "|X_T|^2": _mean_se(sq),
        "X_T": [_mean_se(x[:, j]) for j in range(x.shape[1])],
        "X_T^2": [_mean_se(x[:, j] ** 2) for j in range(x.shape[1])],
        "total_local_time": _mean_se(data.local_time.sum(axis=1)),
    }
    steps = np.maximum(data.steps, 1)
    occupation = {}
    for li, eps in enumerate(cfg.occupation_levels):
        # last column counts steps where the smallest gap is below eps
        occupation[repr(eps)] = _mean_se(data.occupation[:, li, -1] / steps)
    terms, counts = np.unique(data.termination.astype(str), return_counts=True)
    return EnsembleReport(n, faces, subsets, anyk / n, wilson_interval(anyk, n), moments, occupation,
                          cfg.to_dict(), model.spec or model.to_spec(), wall_clock,
                          dict(zip(terms.tolist(), counts.tolist())), int(data.refinements.sum()), data)


def run_ensemble(model: PolyhedralModel, cfg: SimConfig, n: int = 500, threads: int | None = None) -> EnsembleReport:
    t0 = time.perf_counter()
    data = simulate_ensemble(model, cfg, n, threads)
    return summarize(model, cfg, data, time.perf_counter() - t0)


@dataclass
class EdgeWatch:
    subset: tuple[int, ...]
    n: int
    hit_fraction: float
    ci: tuple[float, float]
    min_distance_quantiles: dict
    face_hit_fractions: list
    any_face_fraction: float


def edge_watch(model: PolyhedralModel, cfg: SimConfig, n: int, J) -> EdgeWatch:
    """Fraction of trajectories coming within ``edge_eps`` of the edge ``H_J``."""
    J = J if isinstance(J, FaceSubset) else FaceSubset(tuple(J))
    if len(J) < 2:
        raise GeometryError("edge_watch needs a subset of at least two faces")
    model.domain.subset_projector(J)  # raises on empty H_J
    if J not in model.monitored_subsets:
        model = PolyhedralModel(model.domain, model.potentials, model.initial_point, model.name,
                                model.monitored_subsets + (J,), model.face_notes, model.spec)
    k = model.monitored_subsets.index(J)
    data = simulate_ensemble(model, cfg, n)
    hits = data.subset_hit_at(cfg.edge_eps)[:, k]
    c = int(hits.sum())
    d = data.subset_min_distance[:, k]
    fh = data.hit_at(cfg.hit_eps)
    return EdgeWatch(J.indices, n, c / n, wilson_interval(c, n),
                     {"0.01": float(np.quantile(d, 0.01)), "0.5": float(np.quantile(d, 0.5))},
                     fh.mean(axis=0).tolist(), float(fh.any(axis=1).mean()))


OBSERVABLES = ("|X|^2", "coordinate", "local_time")


@dataclass
class MomentCheck:
    observable: str
    estimate: float
    stderr: float
    target: float | None
    z: float | None

    @property
    def passed(self) -> bool | None:
        return None if self.z is None else abs(self.z) <= 3.0


def moment_check(model: PolyhedralModel, cfg: SimConfig, n: int, observable: str = "|X|^2",
                 target: float | None = None, coordinate: int = 0) -> MomentCheck:
    """Ensemble mean of a terminal observable, with a z-score when ``target`` is given."""
    if observable not in OBSERVABLES:
        raise ValueError(f"observable must be one of {OBSERVABLES}")
    data = simulate_ensemble(model, cfg, n)
    if observable == "|X|^2":
        v = (data.final_state ** 2).sum(axis=1)
    elif observable == "coordinate":
        v = data.final_state[:, coordinate]
    else:
        v = data.local_time.sum(axis=1)
    est, se = _mean_se(v)
    z = None
    if target is not None:
        if se > 0:
            z = (est - target) / se
        else:
            z = 0.0 if est == target else math.inf
    return MomentCheck(observable, est, se, target, z)


def verdicts(report: EnsembleReport) -> list[tuple[str, str, str]]:
    """Per face: (label, class, CONSISTENT/INCONSISTENT) against the classifier prediction.

    Strong faces must show hit fraction 0 and a 1% min-gap quantile above
    3*hit_eps; Middle and Weak faces must be hit at least once. Faces with a
    note overriding the 1-D class (reachable only through an edge) are
    treated like Strong faces.
    """
    eps = report.config["hit_eps"]
    out = []
    for f in report.faces:
        unreachable = f.boundary_class == Repulsion.STRONG.value or bool(f.note)
        if unreachable:
            ok = f.hit_fraction == 0.0 and f.min_gap_q01 > 3 * eps
        else:
            ok = f.hit_fraction > 0.0
        out.append((f.label, f.boundary_class, "CONSISTENT" if ok else "INCONSISTENT"))
    return out
