"""Command line front end: ``chamber classify|simulate|ensemble|validate-roots|list-models``.

Exit codes: 0 ok, 1 usage or schema error, 2 indeterminate classification,
3 validation failure, 4 simulation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .classifier import PREDICTIONS, IndeterminateClassification, classify
from .geometry import GeometryError
from .integrator import SimConfig, SimulationError, StallError, simulate
from .models import ZOO_KINDS, ModelError, build_model
from .montecarlo import run_ensemble, verdicts
from .potentials import ProxConvergenceError
from .rootsys import RootSystem, RootSystemError, standard_root_system, validate

FORMAT_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_INDETERMINATE, EXIT_INVALID, EXIT_SIMULATION = 0, 1, 2, 3, 4

_POTENTIAL = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["zero", "log", "shifted_log", "trig_log_sin", "hyp_log_sinh", "scaled"]},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "c": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "factor": {"type": "number", "exclusiveMinimum": 0},
        "base": {"$ref": "#/$defs/potential"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "chamber run config",
    "type": "object",
    "$defs": {"potential": _POTENTIAL},
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(ZOO_KINDS)},
                "n": {"type": "integer", "minimum": 2},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number"},
                "phi": {"$ref": "#/$defs/potential"},
                "family": {"enum": ["A", "B", "D", "I2"]},
                "rank": {"type": "integer", "minimum": 1},
                "k": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "initial_point": {"type": "array", "items": {"type": "number"}},
                "dimension": {"type": "integer", "minimum": 1},
                "normalize": {"type": "boolean"},
                "faces": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["normal"],
                        "properties": {
                            "normal": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                            "offset": {"type": "number"},
                            "label": {"type": "string"},
                            "potential_id": {"type": "string"},
                            "potential": {"$ref": "#/$defs/potential"},
                        },
                    },
                },
                "monitored_subsets": {"type": "array",
                                      "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "scheme": {"enum": ["prox", "projected"]},
                "hit_eps": {"type": "number", "exclusiveMinimum": 0},
                "edge_eps": {"type": "number", "exclusiveMinimum": 0},
                "escape_radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "record_stride": {"type": "integer", "minimum": 1},
                "bridge_hits": {"type": "boolean"},
                "occupation_levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "max_refine": {"type": "integer", "minimum": 0},
            },
        },
        "n": {"type": "integer"},
        "out": {"type": "string"},
        "format": {"enum": ["csv", "json"]},
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling


def load_config(args) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if getattr(args, "model", None):
        try:
            cfg["model"] = json.loads(args.model)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--model is not valid JSON: {exc}") from None
    sim = dict(cfg.get("sim", {}))
    for flag, key in (("seed", "seed"), ("dt", "dt"), ("horizon", "horizon"), ("hit_eps", "hit_eps"),
                      ("edge_eps", "edge_eps"), ("escape_radius", "escape_radius"),
                      ("record_stride", "record_stride"), ("scheme", "scheme")):
        v = getattr(args, flag, None)
        if v is not None:
            sim[key] = v
    if getattr(args, "no_bridge", False):
        sim["bridge_hits"] = False
    if sim:
        cfg["sim"] = sim
    for flag in ("n", "out", "format"):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[flag] = v
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config invalid at {where}: {exc.message}") from None
    if "model" not in cfg:
        raise UsageError("no model given (use --config or --model)")
    return cfg


def sim_config(cfg: dict) -> SimConfig:
    sim = dict(cfg.get("sim", {}))
    if "seed" not in sim:
        raise UsageError("seed must be given explicitly (--seed or sim.seed)")
    if "occupation_levels" in sim:
        sim["occupation_levels"] = tuple(sim["occupation_levels"])
    try:
        return SimConfig(**sim)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _out_dir(cfg: dict) -> Path:
    d = Path(cfg.get("out", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _embedded(cfg: dict) -> dict:
    # the output location is not part of the run: identical runs give identical bytes
    return {k: v for k, v in cfg.items() if k != "out"}


def _header(cfg: dict) -> dict:
    return {"format_version": FORMAT_VERSION, "config": _embedded(cfg)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(path: Path, doc: dict):
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def _csv_comment(cfg: dict) -> str:
    return f"# format_version={FORMAT_VERSION}\n# config={json.dumps(_jsonable(_embedded(cfg)), sort_keys=True)}\n"


# ---------------------------------------------------------------------------
# commands


def classification_rows(model) -> tuple[list[dict], list[str]]:
    rows, problems = [], []
    for i, f in enumerate(model.domain.faces):
        p = model.potentials[f.potential_id]
        try:
            bc = classify(p)
        except IndeterminateClassification as exc:
            problems.append(f"{f.label}: {exc}")
            rows.append({"face": i, "label": f.label, "class": "Indeterminate", "exponent": None,
                         "method": "log-log regression", "prediction": "undecided", "note": str(exc)})
            continue
        note = model.face_notes.get(i, "")
        rows.append({"face": i, "label": f.label, "class": bc.kind.value, "exponent": bc.exponent,
                     "method": bc.method,
                     "prediction": "face unreachable (edge-only contact)" if note else PREDICTIONS[bc.kind],
                     "note": note})
    return rows, problems


def cmd_classify(args) -> int:
    cfg = load_config(args)
    model = build_model(cfg["model"])
    rows, problems = classification_rows(model)
    fmt = cfg.get("format", "csv")
    if fmt == "json":
        text = json.dumps(_jsonable({**_header(cfg), "model": model.name, "faces": rows}), indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["face", "label", "class", "exponent", "method", "prediction", "note"])
        for r in rows:
            e = r["exponent"]
            w.writerow([r["face"], r["label"], r["class"], "" if e is None else f"{e:.6g}",
                        r["method"], r["prediction"], r["note"]])
        text = buf.getvalue()
    sys.stdout.write(text)
    if "out" in cfg:
        (_out_dir(cfg) / f"classification.{fmt}").write_text(
            text if fmt == "json" else _csv_comment(cfg) + text)
    for p in problems:
        print(f"indeterminate: {p}", file=sys.stderr)
    return EXIT_INDETERMINATE if problems else EXIT_OK


def trajectory_csv(model, traj, cfg: dict) -> str:
    d, m = model.dimension, model.domain.m
    buf = io.StringIO()
    buf.write(_csv_comment(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x_{j + 1}" for j in range(d)] + [f"gap_{i + 1}" for i in range(m)]
               + [f"L_{i + 1}" for i in range(m)])
    L = np.zeros(m)
    for rec in traj.records:
        L = L + rec.local_time_increments
        g = model.domain.gaps(rec.x)
        w.writerow([repr(float(rec.t))] + [repr(float(v)) for v in rec.x]
                   + [repr(float(v)) for v in g] + [repr(float(v)) for v in L])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    model = build_model(cfg["model"])
    sc = sim_config(cfg)
    cfg = {**cfg, "sim": sc.to_dict()}  # embed the resolved settings, defaults included
    traj = simulate(model, sc)
    out = _out_dir(cfg)
    (out / "trajectory.csv").write_text(trajectory_csv(model, traj, cfg))
    summary = {
        **_header(cfg),
        "model": model.name,
        "labels": model.labels,
        "steps": traj.steps,
        "termination": traj.termination,
        "final_state": traj.final_state,
        "min_gaps": traj.min_gaps,
        "local_time": traj.local_time,
        "first_hit": [None if math.isnan(v) else v for v in traj.first_hit],
        "hit_exclusive": traj.hit_exclusive,
        "subset_first_hit": [None if math.isnan(v) else v for v in traj.subset_first_hit],
        "refinements": traj.refinements,
    }
    _dump(out / "summary.json", summary)
    print(f"{model.name}: {traj.steps} steps, termination={traj.termination}, "
          f"min gap={float(np.min(traj.min_gaps)):.3g}")
    return EXIT_OK


HIT_CURVE_EPS = np.geomspace(1e-5, 1e-1, 17)


def cmd_ensemble(args) -> int:
    cfg = load_config(args)
    n = int(cfg.get("n", 500))
    if n < 1:
        raise UsageError(f"--n must be >= 1, got {n}")
    model = build_model(cfg["model"])
    sc = sim_config(cfg)
    cfg = {**cfg, "sim": sc.to_dict()}  # embed the resolved settings, defaults included
    report = run_ensemble(model, sc, n)
    out = _out_dir(cfg)
    verdict = verdicts(report)
    doc = {**report.to_dict(), **_header(cfg),
           "verdicts": [{"label": lab, "class": cls, "verdict": v} for lab, cls, v in verdict]}
    _dump(out / "report.json", doc)
    data = report.data
    # plot data: hit fraction against threshold, and min-gap histograms
    buf = io.StringIO()
    buf.write(_csv_comment(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps"] + model.labels)
    for eps in HIT_CURVE_EPS:
        w.writerow([repr(float(eps))] + [repr(float(v)) for v in data.hit_at(eps).mean(axis=0)])
    (out / "hit_curve.csv").write_text(buf.getvalue())
    buf = io.StringIO()
    buf.write(_csv_comment(cfg))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["face", "bin_lo", "bin_hi", "count"])
    for i, lab in enumerate(model.labels):
        v = np.maximum(data.min_gaps[:, i], 1e-12)
        edges = np.geomspace(max(v.min(), 1e-12), max(v.max(), 1e-12) * (1 + 1e-9) + 1e-12, 21)
        counts, _ = np.histogram(v, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([lab, repr(float(lo)), repr(float(hi)), int(c)])
    (out / "min_gap_hist.csv").write_text(buf.getvalue())
    for f, (lab, cls, v) in zip(report.faces, verdict):
        print(f"{lab}: class={cls} hit_fraction={f.hit_fraction:.4f} "
              f"CI=[{f.ci[0]:.4f}, {f.ci[1]:.4f}] q01={f.min_gap_q01:.3g} {v}")
    for s in report.subsets:
        print(f"edge {list(s.faces)}: hit_fraction={s.hit_fraction:.4f} q01={s.min_distance_q01:.3g}")
    return EXIT_OK


def cmd_validate_roots(args) -> int:
    try:
        if args.roots_file:
            rs = RootSystem.from_dict(json.loads(Path(args.roots_file).read_text()))
        else:
            if not args.family or args.rank is None:
                raise UsageError("give --family and --rank, or --roots-file")
            rs = standard_root_system(args.family, args.rank, args.k or [1.0])
    except RootSystemError as exc:
        raise UsageError(str(exc)) from None
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot load root system: {exc}") from None
    report = validate(rs)
    if args.format == "json":
        print(json.dumps({"format_version": FORMAT_VERSION, "name": rs.name, "ok": report.ok,
                          "n_positive": report.n_positive, "n_simple": report.n_simple,
                          "n_orbits": report.n_orbits, "failures": report.failures}, indent=2))
    else:
        print(f"{rs.name}: {report}")
    return EXIT_OK if report.ok else EXIT_INVALID


MODEL_HELP = {
    "rost_vares": "n, phi: nearest-neighbour pair potential on x_1 < ... < x_n",
    "wishart": "n, delta >= n: square roots of Wishart eigenvalues",
    "dunkl": "family (A|B|D|I2), rank, k (one value per orbit): radial Dunkl process",
    "trig": "n, gamma: particles on the circle, -gamma log sin((x_i - x_j)/2)",
    "hyperbolic": "n, gamma: -gamma log sinh(x_k - x_j)",
    "custom": "dimension, faces [{normal, offset, potential, label}], initial_point",
}


def cmd_list_models(args) -> int:
    if args.schema:
        print(json.dumps(CONFIG_SCHEMA, indent=2))
        return EXIT_OK
    for kind in ZOO_KINDS:
        print(f"{kind:12s} {MODEL_HELP[kind]}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser, sim: bool = True):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--model", help="inline JSON model spec (overrides config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"])
    if sim:
        p.add_argument("--seed", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--horizon", type=float)
        p.add_argument("--hit-eps", dest="hit_eps", type=float)
        p.add_argument("--edge-eps", dest="edge_eps", type=float)
        p.add_argument("--escape-radius", dest="escape_radius", type=float)
        p.add_argument("--record-stride", dest="record_stride", type=int)
        p.add_argument("--scheme", choices=["prox", "projected"])
        p.add_argument("--no-bridge", action="store_true", help="grid-only hit detection")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chamber",
                                 description="Brownian motion in a polyhedron with reflection and singular "
                                             "repulsion at its faces.",
                                 epilog="exit codes: 0 ok, 1 usage or schema error, 2 indeterminate classification, "
                                        "3 validation failure, 4 simulation failure")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("classify", help="classify every face of a model")
    _add_run_flags(p, sim=False)
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("simulate", help="simulate one trajectory")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("ensemble", help="run an ensemble and compare with the classifier")
    _add_run_flags(p)
    p.add_argument("--n", type=int)
    p.set_defaults(func=cmd_ensemble)
    p = sub.add_parser("validate-roots", help="check the root-system axioms")
    p.add_argument("--family", choices=["A", "B", "D", "I2"])
    p.add_argument("--rank", type=int)
    p.add_argument("--k", type=float, action="append", help="multiplicity per orbit (repeat)")
    p.add_argument("--roots-file")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_validate_roots)
    p = sub.add_parser("list-models", help="list model kinds")
    p.add_argument("--schema", action="store_true", help="print the config JSON schema")
    p.set_defaults(func=cmd_list_models)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IndeterminateClassification as exc:
        print(f"indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDETERMINATE
    except (ModelError, GeometryError, RootSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationError, StallError, ProxConvergenceError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIMULATION


if __name__ == "__main__":
    sys.exit(main())
