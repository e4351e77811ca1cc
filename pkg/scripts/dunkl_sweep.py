"""Wall hit fractions of the radial Dunkl process against the multiplicity k.

Walls with k >= 1/2 should never be reached; for k < 1/2 the simple walls
are, while a non-simple wall only meets the chamber closure along edges.

    python3 scripts/dunkl_sweep.py --family A --rank 2 --k 0.1 0.25 0.4 0.6
"""

import argparse
import json


from chamber.integrator import SimConfig
from chamber.montecarlo import run_ensemble, verdicts
from chamber.rootsys import dunkl_model, orbit_count, standard_root_system


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="A")
    ap.add_argument("--rank", type=int, default=2)
    ap.add_argument("--k", type=float, nargs="+", default=[0.1, 0.25, 0.4, 0.6, 0.75])
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--horizon", type=float, default=4.0)
    ap.add_argument("--dt", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=20261016)
    args = ap.parse_args()

    rows = []
    for k in args.k:
        rs = standard_root_system(args.family, args.rank, [k] * orbit_count(args.family, args.rank))
        rep = run_ensemble(dunkl_model(rs), SimConfig(dt=args.dt, horizon=args.horizon, seed=args.seed), args.n)
        v = {lab: verdict for lab, _, verdict in verdicts(rep)}
        for f in rep.faces:
            rows.append({"k": k, "wall": f.label, "class": f.boundary_class, "hit_fraction": f.hit_fraction,
                         "ci": list(f.ci), "min_gap_q01": f.min_gap_q01, "non_simple": bool(f.note),
                         "verdict": v[f.label]})
            print(json.dumps(rows[-1]))
    worst = [r for r in rows if r["verdict"] != "CONSISTENT"]
    print(f"{len(rows)} walls, {len(worst)} inconsistent")
    return 1 if worst else 0


if __name__ == "__main__":
    raise SystemExit(main())
