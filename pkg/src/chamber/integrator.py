"""Time stepping for the reflected barrier SDE ``dX = dB - grad Phi(X) dt + n dL``.

The default scheme is backward Euler written as a proximal step,

    x_next = argmin_{y in closed D} |y - (x + dB)|^2 / 2 + dt * Phi(y),

solved by cyclic block-coordinate sweeps over faces. Each block is an exact
1-D prox along one unit normal, so each update leaves its own face feasible
(the sweep as a whole is feasible at convergence) and the per-face reflection
multipliers fall out of the 1-D solves.
Sweeps crawl when several coupled barriers are nearly tight at once (deep in
a corner); such rows get a damped Newton polish and then resume sweeping.

Trajectories are simulated in batches (rows of arrays). Every row only ever
sees elementwise operations, so a trajectory is bit-identical whichever
batch it runs in.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ive, kve

from . import noise
from .classifier import Repulsion, classify
from .geometry import _max_margin_point
from .models import PolyhedralModel
from .potentials import PotentialDomainError, ProxConvergenceError, Zero

SCHEMES = ("prox", "projected")
MAX_SWEEPS = 2000
SWEEP_RTOL = 1e-13
NEWTON_AFTER = 50
NEWTON_ITERS = 60
STIFF_CURVATURE = 100.0
DRIFT_CLAMP = 10.0
NOISE_BLOCK = 512
BRIDGE_CUTOFF = 50.0


class SimulationError(RuntimeError):
    """Step failure; carries what is needed to replay the trajectory."""

    def __init__(self, msg, seed=None, trajectory=None, step=None):
        super().__init__(f"{msg} (seed={seed}, trajectory={trajectory}, step={step})")
        self.seed, self.trajectory, self.step = seed, trajectory, step


class StallError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    horizon: float = 1.0
    seed: int = 0
    scheme: str = "prox"
    hit_eps: float = 1e-3
    edge_eps: float = 1e-2
    escape_radius: float | None = None
    record_stride: int = 1
    # count between-grid crossings via the Bessel-bridge law (see bridge_hit_probability)
    bridge_hits: bool = True
    occupation_levels: tuple = (1e-2, 1e-3)
    max_refine: int = 4

    def __post_init__(self):
        object.__setattr__(self, "seed", noise.check_seed(self.seed))
        object.__setattr__(self, "occupation_levels", tuple(float(e) for e in self.occupation_levels))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")
        if not self.hit_eps > 0:
            raise ValueError(f"hit_eps must be positive, got {self.hit_eps}")
        if not self.edge_eps > 0:
            raise ValueError(f"edge_eps must be positive, got {self.edge_eps}")
        if self.escape_radius is not None and not self.escape_radius > 0:
            raise ValueError("escape_radius must be positive when given")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0 <= self.max_refine <= noise.PURPOSES - noise.REFINE:
            raise ValueError("max_refine out of range")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9)) if self.horizon > 0 else 0

    def step_sizes(self, k0: int, k1: int) -> np.ndarray:
        """dt for steps k0..k1-1; the last step is shortened to land on the horizon."""
        t0 = np.arange(k0, k1) * self.dt
        return np.minimum(t0 + self.dt, self.horizon) - t0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepRecord:
    t: float
    x: np.ndarray
    dB: np.ndarray
    local_time_increments: np.ndarray
    drift_magnitude: float


@dataclass
class Trajectory:
    records: list
    min_gaps: np.ndarray
    local_time: np.ndarray
    first_hit: np.ndarray          # per face, nan when not hit
    hit_exclusive: np.ndarray      # no other face within hit_eps at the hit step
    bridge_hit: np.ndarray         # crossing detected between grid points
    subset_first_hit: np.ndarray   # per monitored subset, nan when not hit
    subset_min_distance: np.ndarray
    phi_prime_integral: np.ndarray  # sum of dt*|phi_i'(gap_i)|
    occupation: np.ndarray         # (levels, faces + 1) step counts with gap < level; last = min gap
    steps: int
    termination: str
    final_state: np.ndarray
    refinements: int = 0
    degenerate_contacts: int = 0

    @property
    def hit(self) -> np.ndarray:
        return ~np.isnan(self.first_hit)


# ---------------------------------------------------------------------------
# the prox solver


class _FaceSolver:
    """Block-coordinate prox solver over all faces of one model, vectorized over rows."""

    def __init__(self, model: PolyhedralModel, reflect_only: bool = False):
        dom = model.domain
        self.N = np.ascontiguousarray(dom.normals)
        self.a = np.asarray(dom.offsets)
        self.m, self.d = self.N.shape
        self.pots = [Zero() for _ in range(self.m)] if reflect_only else model.face_potentials
        G = self.N @ self.N.T
        # orthonormal normals decouple the blocks: one sweep is exact
        self.orthogonal = bool(np.allclose(G, np.eye(self.m), atol=1e-14))
        self.smooth = all(p._second_derivative is not None for p in self.pots)
        self._interior = None

    def gap(self, y, i):
        return (y * self.N[i]).sum(axis=1) - self.a[i]

    def gaps(self, y):
        return np.stack([self.gap(y, i) for i in range(self.m)], axis=1)

    def solve(self, z, tau, c0):
        """Rows of ``z`` (B, d), common step ``tau``, warm-start coefficients ``c0`` (B, m).

        Returns ``(y, c, lam, ok)`` where ``y = z + c @ N`` and ``ok`` flags
        rows that met the sweep tolerance. Rows finished by the Newton polish
        keep its ``y``; there the identity holds only up to round-off.
        """
        B = z.shape[0]
        c = c0.copy()
        y = z.copy()
        for i in range(self.m):
            y += c[:, i:i + 1] * self.N[i]
        lam = np.zeros((B, self.m))
        tau = float(tau)
        rows = np.arange(B)
        max_sweeps = 1 if self.orthogonal else MAX_SWEEPS
        for sweep in range(max_sweeps):
            if sweep == NEWTON_AFTER and self.smooth:
                settled = self._newton(z, tau, y, c, rows)
                lam[settled] = 0.0
                rows = np.setdiff1d(rows, settled)
                if rows.size == 0:
                    break
            yr, cr = y[rows], c[rows]
            delta = np.zeros(len(rows))
            for i in range(self.m):
                s = self.gap(yr, i) - cr[:, i]
                g, li = self.pots[i].prox(s, tau)
                cn = g - s
                dc = cn - cr[:, i]
                yr += dc[:, None] * self.N[i]
                cr[:, i] = cn
                lam[rows, i] = li
                delta = np.maximum(delta, np.abs(dc) / (1.0 + np.abs(cn)))
            y[rows], c[rows] = yr, cr
            keep = delta > SWEEP_RTOL
            if self.orthogonal:
                keep[:] = False
            rows = rows[keep]
            if rows.size == 0:
                break
        ok = np.ones(B, dtype=bool)
        ok[rows] = False
        if self.smooth:
            # the sweep tolerance is on c; with curvature tau*phi'' >> 1 that leaves a
            # large residual in y, so stiff rows get a final Newton polish
            g = self.gaps(y)
            with np.errstate(invalid="ignore"):
                curv = np.stack([tau * p._second_derivative(np.maximum(g[:, i], 1e-300))
                                 for i, p in enumerate(self.pots)], axis=1).max(axis=1)
            stiff = np.flatnonzero(ok & (curv > STIFF_CURVATURE))
            if stiff.size:
                lam[self._newton(z, tau, y, c, stiff)] = 0.0
        return y, c, lam, ok

    def interior_point(self) -> np.ndarray:
        if self._interior is None:
            self._interior = _max_margin_point(self.N, self.a)[0]
        return self._interior

    def _newton(self, z, tau, y, c, rows):
        """Damped Newton on ``y - z + tau sum phi_i'(g_i) n_i = 0`` for ``rows``, in place.

        Only used while every finite-slope face is slack, so the problem is
        smooth there. Returns the rows it settled; their ``y`` is final.
        Rows where Newton does not settle keep their sweep state.
        """
        slack = np.ones(len(rows), dtype=bool)
        g0 = self.gaps(y[rows])
        for i, p in enumerate(self.pots):
            if not p.is_singular:
                slack &= g0[:, i] > 0
        rows = rows[slack]
        if rows.size == 0:
            return rows
        zr, yr = z[rows], y[rows].copy()
        # mid-sweep iterates can sit just outside other faces; pull them inside
        p0 = self.interior_point()
        g, gp = self.gaps(yr), (self.N @ p0 - self.a)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(g <= 0, -g / (gp - g), 0.0).max(axis=1)
        t = np.where(need > 0, np.minimum(1.0, 2.0 * need + 1e-12), 0.0)
        yr = yr + t[:, None] * (p0 - yr)

        def objective(v, zv):
            g = self.gaps(v)
            return 0.5 * ((v - zv) ** 2).sum(axis=1) + tau * sum(p.value(g[:, i]) for i, p in enumerate(self.pots))

        def residual(v, zv, hessian=False):
            g = self.gaps(v)
            F = v - zv
            size = 1.0 + np.abs(v).max(axis=1) + np.abs(zv).max(axis=1)
            H = np.broadcast_to(np.eye(self.d), (len(v), self.d, self.d)).copy() if hessian else None
            for i, p in enumerate(self.pots):
                d1 = tau * p.derivative(g[:, i])
                F += d1[:, None] * self.N[i]
                size += np.abs(d1)
                if hessian:
                    H += tau * p._second_derivative(g[:, i])[:, None, None] * np.outer(self.N[i], self.N[i])
            return g, F, size, H

        done = np.zeros(len(rows), dtype=bool)
        tiny = np.zeros(len(rows), dtype=bool)
        for _ in range(NEWTON_ITERS):
            act = np.flatnonzero(~done)
            if act.size == 0:
                break
            v, zv = yr[act], zr[act]
            g, F, size, H = residual(v, zv, hessian=True)
            step = -np.linalg.solve(H, F[..., None])[..., 0]
            # converged; a row whose last step was at round-off gets one more step, then stops
            # (near a corner H is ill-conditioned and |F| may never reach the first test)
            conv = (np.abs(F).max(axis=1) <= 1e-12 * size) | tiny[act]
            tiny[act] = np.abs(step).max(axis=1) <= 1e-14 * (1.0 + np.abs(v).max(axis=1))
            done[act[conv]] = True
            # stay strictly inside every face (and below any finite upper end)
            alpha = np.ones(act.size)
            for i, p in enumerate(self.pots):
                dg = step @ self.N[i]
                with np.errstate(divide="ignore", invalid="ignore"):
                    alpha = np.minimum(alpha, np.where(dg < 0, -0.95 * g[:, i] / dg, 1.0))
                    if math.isfinite(p.upper):
                        alpha = np.minimum(alpha, np.where(dg > 0, 0.95 * (p.upper - g[:, i]) / dg, 1.0))
            f0, r0 = objective(v, zv), np.linalg.norm(F, axis=1)
            slope = (F * step).sum(axis=1)
            for _ in range(40):
                trial = v + alpha[:, None] * step
                # close to the solution the objective no longer resolves the decrease,
                # so a drop in |F| also counts; round-off steps are taken whole
                ok = ((objective(trial, zv) <= f0 + 1e-4 * alpha * slope)
                      | (np.linalg.norm(residual(trial, zv)[1], axis=1) <= (1.0 - 1e-4 * alpha) * r0)
                      | tiny[act])
                if np.all(ok):
                    break
                alpha = np.where(ok, alpha, 0.5 * alpha)
            yr[act[~conv]] = trial[~conv]
        good = done & np.all(np.isfinite(yr), axis=1)
        rows, yr = rows[good], yr[good]
        g = self.gaps(yr)
        # per-face displacement c_i = -tau phi_i'(g_i); rebuilding y from c would
        # amplify round-off by tau phi'' near a corner, so y is taken as is
        c[rows] = np.stack([-tau * p.derivative(g[:, i]) for i, p in enumerate(self.pots)], axis=1)
        y[rows] = yr
        return rows

    def gradient(self, x):
        g = np.maximum(self.gaps(x), 1e-300)
        slopes = np.stack([p.derivative(g[:, i]) for i, p in enumerate(self.pots)], axis=1)
        out = np.zeros_like(x)
        for i in range(self.m):
            out += slopes[:, i:i + 1] * self.N[i]
        return out


def _check_prox_input(model, x, dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    if np.min(model.domain.gaps(x)) < -1e-10:
        raise PotentialDomainError("step started outside the closed domain")
    return x


def prox_step(model: PolyhedralModel, x, dB, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One backward-Euler step; returns the new point and per-face multipliers."""
    x = _check_prox_input(model, x, dt)
    solver = _FaceSolver(model)
    z = (x + np.asarray(dB, dtype=float))[None, :]
    y, _, lam, ok = solver.solve(z, dt, np.zeros((1, solver.m)))
    if not ok[0]:
        raise StallError("prox sweeps did not converge")
    return y[0], lam[0]


def projected_euler_step(model: PolyhedralModel, x, dB, dt: float,
                         clamp: float = DRIFT_CLAMP) -> tuple[np.ndarray, np.ndarray]:
    """Explicit drift step followed by Euclidean projection onto the closed domain."""
    x = _check_prox_input(model, x, dt)
    y, lam, ok = _projected_rows(_FaceSolver(model, reflect_only=True), _FaceSolver(model),
                                 x[None, :], np.asarray(dB, float)[None, :], float(dt), clamp)
    if not ok[0]:
        raise StallError("projection sweeps did not converge")
    return y[0], lam[0]


def _projected_rows(proj: _FaceSolver, full: _FaceSolver, x, dB, dt, clamp=DRIFT_CLAMP):
    # huge drifts next to a wall: keep their direction, cap their length (hypot does not overflow)
    drift = np.nan_to_num(-full.gradient(x), nan=0.0, posinf=1e300, neginf=-1e300)
    norm = np.hypot.reduce(drift, axis=1)
    cap = clamp / np.sqrt(dt)
    scale = np.where(norm > cap, cap / np.where(norm > 0, norm, 1.0), 1.0)
    drift = drift * scale[:, None]
    z = x + dB + dt * drift
    y, _, lam, ok = proj.solve(z, dt, np.zeros((len(x), proj.m)))
    return y, lam, ok


def optimality_residual(model: PolyhedralModel, x, dB, dt, y, lam) -> float:
    """|y - (x+dB) + dt sum n_i phi_i'(gap_i(y)) - sum lam_i n_i|."""
    N = model.domain.normals
    g = model.domain.gaps(y)
    slopes = np.array([p.derivative(gi) if lam_i == 0 or gi > 0 else p.derivative_limit_at_zero
                       for p, gi, lam_i in zip(model.face_potentials, g, lam)])
    r = np.asarray(y) - np.asarray(x) - np.asarray(dB) + dt * slopes @ N - np.asarray(lam) @ N
    return float(np.linalg.norm(r))


# ---------------------------------------------------------------------------
# between-grid crossings


def bridge_hit_probability(a, b, dt, nu: float) -> np.ndarray:
    """P(a Bessel bridge of index ``nu`` in (-1, 0) from ``a`` to ``b`` over ``dt`` touches 0).

    With ``z = a b / dt`` the ratio of the killed and reflected transition
    densities gives ``(2/pi) sin(|nu| pi) K_|nu|(z) / I_nu(z)``. At
    ``nu = -1/2`` this is ``2 / (1 + exp(2z))``, the reflected Brownian case.
    """
    if not -1.0 < nu < 0.0:
        raise ValueError(f"bridge index must lie in (-1, 0), got {nu}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    z = np.maximum(a, 0.0) * np.maximum(b, 0.0) / dt
    out = np.zeros(np.broadcast(a, b).shape)
    out[z <= 0] = 1.0
    m = (z > 0) & (z < BRIDGE_CUTOFF)
    if np.any(m):
        zm = z[m]
        mu = -nu
        out[m] = (2.0 / math.pi) * math.sin(mu * math.pi) * kve(mu, zm) / ive(nu, zm) * np.exp(-2.0 * zm)
    return np.clip(out, 0.0, 1.0)


def bridge_indices(model: PolyhedralModel) -> np.ndarray:
    """Per face the Bessel index used for crossing detection; nan where it does not apply.

    Applies to facets that are not of Strong class. Redundant faces (whose
    hyperplane meets the closure only where other faces are tight) are only
    reachable through an edge and get no 1-D correction.
    """
    out = np.full(model.domain.m, np.nan)
    facets = model.domain.facets
    for i, p in enumerate(model.face_potentials):
        if not facets[i]:
            continue
        bc = classify(p)
        if bc.kind is Repulsion.WEAK:
            out[i] = -0.5
        elif bc.kind is Repulsion.MIDDLE:
            out[i] = min(max(bc.exponent - 0.5, -0.999), -1e-6)
    return out


# ---------------------------------------------------------------------------
# the batch engine


class _Batch:
    def __init__(self, model: PolyhedralModel, cfg: SimConfig, traj_ids, record: bool):
        self.model, self.cfg = model, cfg
        self.ids = np.asarray(traj_ids, dtype=np.int64)
        B = len(self.ids)
        self.solver = _FaceSolver(model)
        self.proj = _FaceSolver(model, reflect_only=True) if cfg.scheme == "projected" else None
        m, d = self.solver.m, self.solver.d
        self.m, self.d, self.B = m, d, B
        self.subsets = [model.domain.subset_projector(J) for J in model.monitored_subsets]
        self.nu = bridge_indices(model) if cfg.bridge_hits else np.full(m, np.nan)
        self.bridge_faces = np.flatnonzero(~np.isnan(self.nu))

        x0 = np.broadcast_to(model.initial_point, (B, d)).copy()
        self.x = x0
        self.c = np.zeros((B, m))
        g0 = self.solver.gaps(x0)
        self.gaps = g0
        self.min_gaps = g0.copy()
        self.L = np.zeros((B, m))
        self.first_hit = np.full((B, m), np.nan)
        self.exclusive = np.zeros((B, m), dtype=bool)
        self.bridge_hit = np.zeros((B, m), dtype=bool)
        ns = len(self.subsets)
        self.sub_first = np.full((B, ns), np.nan)
        self.sub_min = np.stack([self._subset_distance(x0, k) for k in range(ns)], axis=1) if ns else np.zeros((B, 0))
        self.phi_int = np.zeros((B, m))
        self.occ = np.zeros((B, len(cfg.occupation_levels), m + 1), dtype=np.int64)
        self.steps = np.zeros(B, dtype=np.int64)
        self.alive = np.ones(B, dtype=bool)
        self.term = np.array(["horizon"] * B, dtype=object)
        self.refinements = np.zeros(B, dtype=np.int64)
        self.degenerate = np.zeros(B, dtype=np.int64)
        self._mark_hits(g0, np.zeros(B), np.ones(B, dtype=bool))
        self._mark_subsets(self.sub_min, np.zeros(B), np.ones(B, dtype=bool))
        if cfg.escape_radius is not None:
            out = np.sqrt((x0 * x0).sum(axis=1)) >= cfg.escape_radius
            self.alive &= ~out
            self.term[out] = "escape"
        self.record = record
        self.records = [[] for _ in range(B)]
        if record:
            for r in range(B):
                self.records[r].append(StepRecord(0.0, x0[r].copy(), np.zeros(d), np.zeros(m),
                                                  self._drift_norm(x0[r:r + 1])[0]))

    # helpers

    def _subset_distance(self, x, k):
        NJ, aJ, P = self.subsets[k]
        r = np.stack([(x * NJ[j]).sum(axis=1) - aJ[j] for j in range(len(aJ))], axis=1)
        v = np.zeros_like(x)
        for j in range(len(aJ)):
            v += r[:, j:j + 1] * P[:, j]
        return np.sqrt((v * v).sum(axis=1))

    def _drift_norm(self, x):
        gr = self.solver.gradient(x)
        return np.sqrt((gr * gr).sum(axis=1))

    def _mark_hits(self, g, t, rows_mask, bridge=None):
        near = g <= self.cfg.hit_eps
        hit = near if bridge is None else (near | bridge)
        new = hit & np.isnan(self.first_hit) & rows_mask[:, None]
        if new.any():
            others = near.sum(axis=1, keepdims=True) - near
            r, i = np.nonzero(new)
            self.first_hit[r, i] = t[r]
            self.exclusive[r, i] = others[r, i] == 0

    def _mark_subsets(self, dist, t, rows_mask):
        new = (dist <= self.cfg.edge_eps) & np.isnan(self.sub_first) & rows_mask[:, None]
        if new.any():
            r, k = np.nonzero(new)
            self.sub_first[r, k] = t[r]

    # stepping

    def _advance(self, rows, x, c, dB, h, step):
        """One step for the given rows; returns (y, c, lam)."""
        if self.cfg.scheme == "projected":
            y, lam, ok = _projected_rows(self.proj, self.solver, x, dB, h)
            cn = c
        else:
            try:
                y, cn, lam, ok = self.solver.solve(x + dB, h, c)
            except ProxConvergenceError:
                ok = np.zeros(len(rows), dtype=bool)
                y, cn, lam = x.copy(), c.copy(), np.zeros_like(c)
        for r in np.flatnonzero(~ok):
            y[r], cn[r], lam[r] = self._refine(rows[r], x[r], c[r], dB[r], h, step, 1, 0)
        return y, cn, lam

    def _refine(self, row, x, c, dB, h, step, depth, sub):
        """Redo one step as two halves joined at a Brownian-bridge midpoint."""
        if depth > self.cfg.max_refine:
            raise SimulationError("prox solver stalled after refinement", self.cfg.seed,
                                  int(self.ids[row]), int(step))
        self.refinements[row] += 1
        mid = noise.bridge_midpoint(self.cfg.seed, int(self.ids[row]), int(step), depth, sub, dB, h)
        lam_total = np.zeros(self.m)
        for half, inc in ((0, mid), (1, dB - mid)):
            rr = np.array([row])
            y, cn, lam = self._advance_one(rr, x, c, inc, 0.5 * h, step, depth + 1, 2 * sub + half)
            x, c = y, cn
            lam_total += lam
        return x, c, lam_total

    def _advance_one(self, rr, x, c, dB, h, step, depth, sub):
        if self.cfg.scheme == "projected":
            y, lam, ok = _projected_rows(self.proj, self.solver, x[None], dB[None], h)
            cn = c[None]
        else:
            try:
                y, cn, lam, ok = self.solver.solve((x + dB)[None], h, c[None])
            except ProxConvergenceError:
                ok = np.array([False])
        if not ok[0]:
            return self._refine(rr[0], x, c, dB, h, step, depth, sub)
        return y[0], cn[0], lam[0]

    def run(self):
        cfg = self.cfg
        n = cfg.n_steps
        stride = cfg.record_stride
        levels = np.asarray(cfg.occupation_levels)
        pots = self.solver.pots
        for k0 in range(0, n, NOISE_BLOCK):
            if not self.alive.any():
                break
            k1 = min(n, k0 + NOISE_BLOCK)
            hs = cfg.step_sizes(k0, k1)
            live = np.flatnonzero(self.alive)
            Z = noise.brownian_block(cfg.seed, self.ids[live], k0, k1 - k0, self.d, 1.0)
            U = (noise.uniform_block(cfg.seed, self.ids[live], k0, k1 - k0, self.m)
                 if self.bridge_faces.size else None)
            pos = np.full(self.B, -1)
            pos[live] = np.arange(len(live))
            for k in range(k0, k1):
                rows = np.flatnonzero(self.alive)
                if rows.size == 0:
                    break
                h = hs[k - k0]
                dB = Z[pos[rows], k - k0] * math.sqrt(h)
                x, g_old = self.x[rows], self.gaps[rows]
                y, cn, lam = self._advance(rows, x, self.c[rows], dB, h, k)
                if not np.all(np.isfinite(y)):
                    bad = rows[np.flatnonzero(~np.isfinite(y).all(axis=1))[0]]
                    raise SimulationError("non-finite state", cfg.seed, int(self.ids[bad]), k)
                g = self.solver.gaps(y)
                t = (k + 1) * cfg.dt if k + 1 < n else cfg.horizon
                self.x[rows], self.c[rows], self.gaps[rows] = y, cn, g
                self.L[rows] += lam
                self.steps[rows] += 1
                self.min_gaps[rows] = np.minimum(self.min_gaps[rows], g)
                for i, p in enumerate(pots):
                    self.phi_int[rows, i] += h * np.abs(p.derivative(g[:, i]))
                self.occ[rows, :, :-1] += g[:, None, :] < levels[None, :, None]
                self.occ[rows, :, -1] += g.min(axis=1)[:, None] < levels[None, :]
                bridge = None
                if self.bridge_faces.size:
                    bridge = np.zeros((rows.size, self.m), dtype=bool)
                    u = U[pos[rows], k - k0]
                    for i in self.bridge_faces:
                        pr = bridge_hit_probability(g_old[:, i], g[:, i], h, self.nu[i])
                        bridge[:, i] = u[:, i] < pr
                    self.bridge_hit[rows] |= bridge
                full_t = np.full(self.B, t)
                mask = np.zeros(self.B, dtype=bool)
                mask[rows] = True
                gg = np.full((self.B, self.m), np.inf)
                gg[rows] = g
                bb = None
                if bridge is not None:
                    bb = np.zeros((self.B, self.m), dtype=bool)
                    bb[rows] = bridge
                self._mark_hits(gg, full_t, mask, bb)
                if self.subsets:
                    dist = np.full((self.B, len(self.subsets)), np.inf)
                    dist[rows] = np.stack([self._subset_distance(y, j) for j in range(len(self.subsets))], axis=1)
                    self.sub_min = np.minimum(self.sub_min, dist)
                    self._mark_subsets(dist, full_t, mask)
                multi = (lam > 0).sum(axis=1) >= 2
                for r in np.flatnonzero(multi):
                    act = np.flatnonzero(lam[r] > 0)
                    if np.linalg.matrix_rank(self.solver.N[act], tol=1e-9) < act.size:
                        self.degenerate[rows[r]] += 1
                escaped = np.zeros(rows.size, dtype=bool)
                if cfg.escape_radius is not None:
                    escaped = np.sqrt((y * y).sum(axis=1)) >= cfg.escape_radius
                    self.alive[rows[escaped]] = False
                    self.term[rows[escaped]] = "escape"
                if self.record:
                    last = k + 1 == n
                    for j, r in enumerate(rows):
                        if (k + 1) % stride == 0 or last or escaped[j]:
                            self.records[r].append(StepRecord(t, y[j].copy(), dB[j].copy(), lam[j].copy(),
                                                              self._drift_norm(y[j:j + 1])[0]))
        return self

    def trajectory(self, r: int) -> Trajectory:
        return Trajectory(
            records=self.records[r],
            min_gaps=self.min_gaps[r].copy(),
            local_time=self.L[r].copy(),
            first_hit=self.first_hit[r].copy(),
            hit_exclusive=self.exclusive[r].copy(),
            bridge_hit=self.bridge_hit[r].copy(),
            subset_first_hit=self.sub_first[r].copy(),
            subset_min_distance=self.sub_min[r].copy(),
            phi_prime_integral=self.phi_int[r].copy(),
            occupation=self.occ[r].copy(),
            steps=int(self.steps[r]),
            termination=str(self.term[r]),
            final_state=self.x[r].copy(),
            refinements=int(self.refinements[r]),
            degenerate_contacts=int(self.degenerate[r]),
        )


def simulate_batch(model: PolyhedralModel, cfg: SimConfig, traj_ids, record: bool = False) -> _Batch:
    return _Batch(model, cfg, traj_ids, record).run()


def simulate(model: PolyhedralModel, cfg: SimConfig, trajectory: int = 0) -> Trajectory:
    """Simulate one trajectory (index ``trajectory`` of the seed's family of streams)."""
    return simulate_batch(model, cfg, [trajectory], record=True).trajectory(0)
