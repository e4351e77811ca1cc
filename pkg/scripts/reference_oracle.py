"""Fine-step reference runs that fix the Monte Carlo targets before the main build.

Deliberately independent of the package: its own RNG (numpy default_rng),
its own implicit step (damped Newton on the full optimality system instead
of face-by-face prox sweeps) and grid-only hit detection at dt=1e-6, where
the implicit step's floor sqrt(gamma*dt) sits below the 1e-3 threshold.

Every face carries -gamma_i log(gap_i) with unit normals, which covers the
1-D barrier, the radial Dunkl A2 chamber and the 3-particle nearest-neighbour
model (whose pair barrier -gamma log(x_{i+1} - x_i) differs from
-gamma log(gap_i) by a constant).

    python3 scripts/reference_oracle.py [--quick] [--out tests/data/reference_targets.json]
"""

import argparse
import json
import math
import time

import numpy as np
from scipy.special import gammaincc


def implicit_step(y, z, N, a, gam, tau, tol=1e-13):
    """argmin |y - z|^2/2 - tau sum gam_i log(N y - a)_i by damped Newton, rows of y."""
    for _ in range(100):
        g = y @ N.T - a
        w = tau * gam / g
        F = y - z - w @ N
        if np.max(np.abs(F)) <= tol * (1 + np.max(np.abs(y))):
            return y
        H = np.eye(N.shape[1])[None] + np.einsum("bi,ij,ik->bjk", w / g, N, N)
        dy = -np.linalg.solve(H, F[..., None])[..., 0]
        dg = dy @ N.T
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(dg < 0, -g / dg, np.inf).min(axis=1)
        alpha = np.minimum(1.0, 0.95 * lim)
        y = y + alpha[:, None] * dy
    raise RuntimeError("Newton did not converge")


def run(N, a, gam, x0, T, dt, n, eps, seed, edge=None, edge_eps=None, block=256):
    N = np.asarray(N, float)
    a = np.asarray(a, float)
    gam = np.asarray(gam, float)
    rng = np.random.default_rng(seed)
    d = N.shape[1]
    hit = np.zeros((n, len(a)), dtype=bool)
    edge_hit = np.zeros(n, dtype=bool)
    for b0 in range(0, n, block):
        rows = min(block, n - b0)
        x = np.tile(np.asarray(x0, float), (rows, 1))
        for _ in range(int(round(T / dt))):
            z = x + rng.standard_normal((rows, d)) * math.sqrt(dt)
            x = implicit_step(x.copy(), z, N, a, gam, dt)
            g = x @ N.T - a
            hit[b0:b0 + rows] |= g <= eps
            if edge is not None:
                NJ = N[list(edge)]
                r = g[:, list(edge)]
                v = r @ np.linalg.pinv(NJ).T
                edge_hit[b0:b0 + rows] |= np.sqrt((v * v).sum(axis=1)) <= edge_eps
    return hit, edge_hit


def wilson(k, n, z=1.959964):
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return [max(0.0, c - h), min(1.0, c + h)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="coarse dt, small n (smoke run)")
    ap.add_argument("--out", default="tests/data/reference_targets.json")
    ap.add_argument("--only", default="")
    args = ap.parse_args()
    dt = 1e-4 if args.quick else 1e-6
    s2 = math.sqrt(2.0)
    out = {"dt": dt, "detection": "grid-only, gap <= 1e-3", "rng": "numpy default_rng"}
    try:
        out.update(json.load(open(args.out)))
    except OSError:
        pass
    out["dt"] = dt
    jobs = {
        "barrier_1d_gamma0.25": lambda: dict(
            N=[[1.0]], a=[0.0], gam=[0.25], x0=[0.5], T=4.0, n=100 if args.quick else 256),
        "dunkl_A2_k0.25": lambda: dict(
            N=[[1 / s2, -1 / s2, 0], [1 / s2, 0, -1 / s2], [0, 1 / s2, -1 / s2]], a=[0, 0, 0],
            gam=[0.25] * 3, x0=[1 / s2, 0.0, -1 / s2], T=4.0, n=64 if args.quick else 256),
        "rost_vares_3_gamma0.2": lambda: dict(
            N=[[-1 / s2, 1 / s2, 0], [0, -1 / s2, 1 / s2]], a=[0, 0], gam=[0.2, 0.2],
            x0=[0.0, 1.0, 2.0], T=1.0, n=100 if args.quick else 300, edge=(0, 1), edge_eps=1e-2),
    }
    for name, job in jobs.items():
        if args.only and name not in args.only.split(","):
            continue
        kw = job()
        n = kw.pop("n")
        t0 = time.time()
        hit, edge_hit = run(dt=dt, n=n, eps=1e-3, seed=20261016, **kw)
        per_face = hit.mean(axis=0)
        res = {
            "n": n, "T": kw["T"], "x0": kw["x0"],
            "per_face_fraction": per_face.tolist(),
            "per_face_ci": [wilson(int(k), n) for k in hit.sum(axis=0)],
            "any_face_fraction": float(hit.any(axis=1).mean()),
            "any_face_ci": wilson(int(hit.any(axis=1).sum()), n),
            "seconds": time.time() - t0,
        }
        if kw.get("edge") is not None:
            res["edge_fraction"] = float(edge_hit.mean())
        if name.startswith("barrier_1d"):
            res["analytic_hit_probability"] = float(gammaincc(0.5 - 0.25, 0.5**2 / (2 * 4.0)))
        out[name] = res
        print(name, json.dumps(res))
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
