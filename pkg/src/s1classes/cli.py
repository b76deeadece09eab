"""Scenario runner.

    s1classes run scenario.json [--out DIR] [--deterministic] [--max-iters K]
    s1classes sweep scenario.json --param h --values 1/32,1/64,1/128

A scenario is one JSON document::

    {"experiment": "sigma",
     "domain": {"shape": "disc", "params": {"radius": 1.0}},
     "config": {"points": [[0.1, 0.05]], "degrees": [1]},
     "h": 0.0078125}

Experiments: sigma, matching, dual, averaging, dipole, tn-distance,
dist-bounds, growth, dumbbell, lifting, equality-probe. Two-class
experiments read "u0" and "v0" instead of "config".

Outputs land in <out>/<name>/: summary.json (results, every number tagged
with the method that produced it), table.csv where the experiment has rows,
and metadata.json (timestamps, runtimes, backend). Exit codes: 0 success,
2 a checked inequality failed, 3 bad input or unmet precondition.

Environment: S1CLASSES_OUT overrides the default output directory and
S1CLASSES_THREADS the number of sweep workers.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .errors import NumericError, S1Error
from .fields import canonical_field, energy_lp
from .geometry import Domain, grid_avoiding
from .matching import (
    Configuration,
    boundary_augment,
    check_lipschitz,
    kantorovich_dual,
    kantorovich_dual_lp,
    matching_bruteforce,
    min_cost_matching,
    sigma_exact,
)

EXIT_OK, EXIT_ERROR, EXIT_CHECK, EXIT_INPUT = 0, 1, 2, 3
EXPERIMENTS = ("sigma", "matching", "dual", "averaging", "dipole", "tn-distance", "dist-bounds",
               "growth", "dumbbell", "lifting", "equality-probe")
SWEEP_PARAMS = ("h", "n", "p", "eps", "Q")


class InputError(Exception):
    pass


def L(value, method: str) -> dict:
    """A number tagged with the method that produced it."""
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    return {"value": value, "method": method}


# scenario parsing -----------------------------------------------------------

def _number(x):
    if isinstance(x, str):
        try:
            return float(Fraction(x))
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a number: {x!r}") from exc
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"not a number: {x!r}")
    return float(x)


def load_scenario(path) -> dict:
    try:
        sc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON: {exc}") from exc
    if not isinstance(sc, dict):
        raise InputError("scenario must be a JSON object")
    validate(sc)
    return sc


def validate(sc: dict) -> None:
    exp = sc.get("experiment")
    if exp not in EXPERIMENTS:
        raise InputError(f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
    hs = sc.get("h", sc.get("grid", 1 / 64))
    hs = hs if isinstance(hs, list) else [hs]
    if not hs:
        raise InputError("grid list is empty")
    for h in hs:
        if not _number(h) > 0:
            raise InputError("grid spacing must be positive")


def _domain(sc) -> Domain:
    if sc.get("experiment") == "dumbbell":
        return None
    return Domain.from_json(sc.get("domain", {"shape": "disc", "params": {}}))


def _config(sc, key="config") -> Configuration:
    if key not in sc:
        raise InputError(f"scenario needs {key!r}")
    return Configuration.from_json(sc[key])


def _h(sc) -> float:
    h = sc.get("h", sc.get("grid", 1 / 64))
    return _number(h[0] if isinstance(h, list) else h)


def _settings(sc):
    from .sigma import SolverSettings

    s = SolverSettings()
    for k, v in (sc.get("solver") or {}).items():
        if not hasattr(s, k):
            raise InputError(f"unknown solver setting {k!r}")
        setattr(s, k, v)
    if sc.get("deterministic"):
        s.time_limit = None  # wall-clock stopping is not reproducible
    return s


def _grid(sc, dom, *configs):
    pts = [p for c in configs for p in c.points]
    return grid_avoiding(dom, _h(sc), pts)


# experiments --------------------------------------------------------------------

def _tol(sc, default):
    return float(sc.get("tol", default))


def exp_sigma(sc):
    from .sigma import sigma_of_config

    dom, cfg = _domain(sc), _config(sc)
    g = _grid(sc, dom, cfg)
    est = sigma_of_config(cfg, dom, g, _settings(sc), rel_tol=_tol(sc, 0.05))
    res = {"sigma_exact": L(est.exact, "exact"), "sigma_dual": L(est.dual, "dual"),
           "sigma_variational": L(est.variational, "variational"),
           "variational_lower_bound": L(est.variational_lower, "variational"),
           "iterations": est.iterations, "converged": est.converged}
    ref = est.exact if est.exact > 0 else None
    return res, None, est.checks, (est.variational, ref)


def exp_matching(sc):
    dom, cfg = _domain(sc), _config(sc)
    ms = boundary_augment(cfg)
    m = min_cost_matching(ms, dom)
    res = {"m": ms.m, "cost": L(m.cost, "exact"), "sigma": L(2 * math.pi * m.cost, "exact"),
           "pairing": list(m.sigma)}
    checks = {}
    if ms.m <= 8:
        bf = matching_bruteforce(ms, dom)
        res["cost_bruteforce"] = L(bf.cost, "exact")
        checks["hungarian_vs_bruteforce"] = abs(bf.cost - m.cost) <= 1e-9
    rows = [{"positive": _loc(ms.positives[i]), "negative": _loc(ms.negatives[j])} for i, j in enumerate(m.sigma)]
    return res, rows, checks, (m.cost, None)


def _loc(x):
    return "boundary" if not isinstance(x, tuple) else f"({x[0]:.12g};{x[1]:.12g})"


def exp_dual(sc):
    dom, cfg = _domain(sc), _config(sc)
    ms = boundary_augment(cfg)
    primal = min_cost_matching(ms, dom).cost
    if ms.m == 0:
        return {"primal": L(0.0, "exact"), "dual": L(0.0, "dual")}, None, {}, (0.0, None)
    pot = kantorovich_dual(ms, dom)
    lp = kantorovich_dual_lp(ms, dom)
    viol = check_lipschitz(pot, dom)
    res = {"primal": L(primal, "exact"), "dual": L(pot.value, "dual"), "dual_lp": L(lp.value, "dual"),
           "lipschitz_violation": L(max(viol, 0.0), "dual")}
    rows = [{"location": _loc(x), "potential[dual]": z} for x, z in zip(pot.locations, pot.values)]
    checks = {"strong_duality": abs(primal - pot.value) <= 1e-9, "lp_agrees": abs(lp.value - pot.value) <= 1e-7,
              "lipschitz": viol <= 1e-12}
    return res, rows, checks, (pot.value, primal)


def exp_averaging(sc):
    from .sigma import averaging_identity_check

    dom, cfg = _domain(sc), _config(sc)
    u = canonical_field(cfg, dom, _grid(sc, dom, cfg))
    lhs, rhs, rel = averaging_identity_check(u, int(sc.get("Q", 256)))
    res = {"average": L(lhs, "grid"), "four_times_energy": L(rhs, "grid"), "relative_error": L(rel, "grid")}
    return res, None, {"averaging_identity": rel <= _tol(sc, 0.02)}, (lhs, rhs)


def exp_dipole(sc):
    from .sigma import dipole_sequence, near_minimizer

    dom, cfg = _domain(sc), _config(sc)
    g = _grid(sc, dom, cfg)
    sig = sigma_exact(cfg, dom)
    w = near_minimizer(cfg, dom, g, _settings(sc))
    schedule = [2 * math.pi / 4**n for n in range(1, int(sc.get("steps", 6)) + 1)]
    seq = dipole_sequence(w, schedule, int(sc.get("n_theta", 360)))
    area = g.n_interior * g.h**2
    rows = [{"eps": s.eps, "theta": s.theta, "energy[grid]": s.energy, "support[grid]": s.support,
             "energy_over_sigma": s.energy / sig if sig > 0 else math.nan} for s in seq.steps]
    best = min(s.energy for s in seq.steps)
    res = {"sigma": L(sig, "exact"), "final_energy": L(seq.final.energy, "witness"),
           "best_energy": L(best, "witness"), "near_minimizer_energy": L(energy_lp(w, 1).value, "variational")}
    checks = {"support": all(s.support <= 1.5 * s.eps * area for s in seq.steps)}
    if sig > 0:
        checks["energy_reaches_sigma"] = best <= 1.10 * sig
    return res, rows, checks, (seq.final.energy, sig)


def exp_tn(sc):
    from .sigma import tn_distance_experiment

    dom = _domain(sc)
    u0, v0 = _config(sc, "u0"), _config(sc, "v0")
    g = _grid(sc, dom, u0, v0)
    ns = sc.get("n", [9, 25, 49])
    ns = ns if isinstance(ns, list) else [ns]
    rows = tn_distance_experiment(u0, v0, ns, dom, g, _settings(sc), n_theta=int(sc.get("n_theta", 360)))
    out = [{"n": r["n"], "distance[witness]": r["distance"], "sigma[exact]": r["sigma"], "ratio": r["ratio"],
            "lower_ratio[exact]": r["lower_bound_ratio"]} for r in rows]
    tol = _tol(sc, 0.03)
    checks = {"upper_bound": all(r["ratio"] <= 1.10 for r in rows),
              "lower_bound": all(r["ratio"] >= 2 / math.pi * (1 - tol) for r in rows)}
    res = {"sigma": L(rows[0]["sigma"], "exact"), "ratios": [L(r["ratio"], "witness") for r in rows]}
    return res, out, checks, (rows[-1]["ratio"], None)


def exp_dist_bounds(sc):
    from .sigma import dist_bounds

    dom = _domain(sc)
    u0, v0 = _config(sc, "u0"), _config(sc, "v0")
    p = float(sc.get("p", 1.0))
    b = dist_bounds(u0, v0, p, dom, _grid(sc, dom, u0, v0), _settings(sc))
    res = {"p": p, "lower": L(b.lower, "exact" if p == 1 else "variational"), "upper": L(b.upper, "witness"),
           "witness": b.witness}
    return res, None, {"sandwich": b.lower * (1 - _tol(sc, 0.03)) <= b.upper}, (b.upper, b.lower)


def exp_growth(sc):
    from .sigma import growth_experiment

    dom, v0 = _domain(sc), _config(sc, "v0")
    p = float(sc.get("p", 1.5))
    ns = sc.get("n", [4, 8, 16, 32])
    ns = ns if isinstance(ns, list) else [ns]
    slope, rows = growth_experiment(v0, p, ns, dom, _grid(sc, dom, v0))
    sig = sigma_exact(v0, dom)
    res = {"p": p, "slope": L(slope, "witness"), "expected_slope": L(p - 1, "exact"), "sigma_v0": L(sig, "exact")}
    checks = {}
    if p > 1:
        checks["slope"] = abs(slope - (p - 1)) <= 0.25 * (p - 1)
    else:
        checks["bounded_by_sigma"] = all(r["energy"] <= 1.05 * sig for r in rows)
    out = [{"n": r["n"], "energy[witness]": r["energy"], "witness": r["witness"]} for r in rows]
    return res, out, checks, (slope, p - 1)


def exp_dumbbell(sc):
    from .sigma import strict_inequality_probe

    eps = float(sc.get("eps", 0.2))
    rep = strict_inequality_probe(eps, float(sc.get("p", 1.5)), _h(sc), _settings(sc))
    methods = {"lower": "exact", "two_over_pi_infimum": "variational", "witness_distance": "witness",
               "observed_gap": "witness", "annulus_bound_per_unit_radius": "exact", "annulus_contribution": "exact"}
    res = {k: L(v, methods[k]) if k in methods else v for k, v in rep.items()}
    return res, None, {}, (rep.get("witness_distance"), None)


def exp_lifting(sc):
    from .sigma import optimal_lifting_energy

    dom, cfg = _domain(sc), _config(sc)
    p = float(sc.get("p", 1.0))
    u = canonical_field(cfg, dom, _grid(sc, dom, cfg))
    e = energy_lp(u, p).value
    res = {"energy": L(e, "grid"), "sigma": L(sigma_exact(cfg, dom), "exact"),
           "lifting_energy": L(optimal_lifting_energy(u, _settings(sc)), "exact+grid")}
    ref = None
    if dom.kind == "disc" and len(cfg) == 1 and np.allclose(cfg.points[0], dom.params[0]) and p < 2:
        ref = 2 * math.pi * dom.params[1] ** (2 - p) * abs(cfg.degrees[0]) ** p / (2 - p)
        res["energy_closed_form"] = L(ref, "exact")
    return res, None, {}, (e, ref)


def exp_equality(sc):
    from .sigma import equality_case_probe

    dom, cfg = _domain(sc), _config(sc)
    u = canonical_field(cfg, dom, _grid(sc, dom, cfg))
    r = equality_case_probe(u, _settings(sc), int(sc.get("Q", 128)))
    res = {"energy": L(r["energy"], "grid"), "sigma": L(r["sigma"], r["sigma_method"]),
           "ratio": L(r["ratio"], "grid") if r["ratio"] is not None else None, "status": r["status"],
           "projection_distance": L(r["projection_distance"], "witness"),
           "two_over_pi_energy": L(r["two_over_pi_energy"], "grid")}
    return res, None, {}, (r["ratio"], None)


RUNNERS = {"sigma": exp_sigma, "matching": exp_matching, "dual": exp_dual, "averaging": exp_averaging,
           "dipole": exp_dipole, "tn-distance": exp_tn, "dist-bounds": exp_dist_bounds, "growth": exp_growth,
           "dumbbell": exp_dumbbell, "lifting": exp_lifting, "equality-probe": exp_equality}


# execution and output -----------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def _csv(rows) -> str:
    buf = io.StringIO()
    keys = list(rows[0].keys())
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def execute(sc: dict):
    """(summary, rows, checks, key) for one scenario."""
    res, rows, checks, key = RUNNERS[sc["experiment"]](sc)
    summary = {"experiment": sc["experiment"], "scenario": sc, "results": res,
               "checks": {k: bool(v) for k, v in checks.items()}, "passed": all(checks.values()),
               "version": __version__}
    if sc["experiment"] != "dumbbell" and "domain" in sc:
        summary["domain"] = _domain(sc).to_json()
    summary["h"] = _h(sc)
    summary["solver"] = _settings(sc).to_json()
    return _clean(summary), rows, checks, key


def _out_dir(args, sc, name):
    base = args.out or os.environ.get("S1CLASSES_OUT") or "s1classes-out"
    return Path(base) / (sc.get("name") or name)


def _apply_flags(sc: dict, args) -> dict:
    sc = dict(sc)
    if args.deterministic:
        sc["deterministic"] = True
    if args.max_iters is not None:
        sc["solver"] = dict(sc.get("solver") or {}, max_iters=int(args.max_iters))
    return sc


def cmd_run(args) -> int:
    sc = _apply_flags(load_scenario(args.file), args)
    t0 = time.time()
    summary, rows, checks, _ = execute(sc)
    out = _out_dir(args, sc, Path(args.file).stem)
    _atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if rows:
        _atomic_write(out / "table.csv", _csv(rows))
    meta = {"started": t0, "finished": time.time(), "seconds": time.time() - t0, "backend": kernels.BACKEND,
            "python": sys.version.split()[0], "numpy": np.__version__}
    _atomic_write(out / "metadata.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"experiment": sc["experiment"], "passed": summary["passed"], "out": str(out)}))
    return EXIT_OK if summary["passed"] else EXIT_CHECK


def _parse_values(text: str, param: str):
    parts = [t for t in text.replace(" ", "").split(",") if t]
    if not parts:
        raise InputError("sweep value list is empty")
    vals = [_number(t) for t in parts]
    if param in ("n", "Q"):
        if any(v != int(v) for v in vals):
            raise InputError(f"{param} values must be integers")
        vals = [int(v) for v in vals]
    return vals


def _fitted_rate(xs, ys, refs):
    """Slope of log(error) (or log(value) without a reference) against log(parameter)."""
    pts = []
    for x, y, r in zip(xs, ys, refs):
        if y is None or x <= 0:
            continue
        z = abs(y - r) if r is not None else abs(y)
        if z > 0:
            pts.append((math.log(x), math.log(z)))
    if len(pts) < 2:
        return None
    a = np.array(pts)
    return float(np.polyfit(a[:, 0], a[:, 1], 1)[0])


def cmd_sweep(args) -> int:
    sc = _apply_flags(load_scenario(args.file), args)
    if args.param not in SWEEP_PARAMS:
        raise InputError(f"unknown sweep parameter {args.param!r}")
    vals = _parse_values(args.values, args.param)
    t0 = time.time()

    def one(v):
        s = dict(sc)
        s[args.param] = [v] if args.param == "n" and sc["experiment"] == "tn-distance" else v
        return execute(s)

    threads = int(os.environ.get("S1CLASSES_THREADS", "1") or 1)
    if sc.get("deterministic") or threads <= 1:
        results = [one(v) for v in vals]
    else:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, vals))
    rows = []
    for v, (summary, _, checks, key) in zip(vals, results):
        rows.append({args.param: v, "value": key[0], "reference": key[1], "passed": all(checks.values())})
    rate = _fitted_rate([r[args.param] for r in rows], [r["value"] for r in rows], [r["reference"] for r in rows])
    for r in rows:
        r["fitted_rate"] = rate
    out = _out_dir(args, sc, Path(args.file).stem + f"-sweep-{args.param}")
    _atomic_write(out / "sweep.csv", _csv(rows))
    summary = {"experiment": sc["experiment"], "param": args.param, "values": vals,
               "rows": [{**r, "value": L(r["value"], "grid"), "reference": L(r["reference"], "exact")} for r in rows],
               "fitted_rate": rate, "passed": all(r["passed"] for r in rows)}
    _atomic_write(out / "summary.json", json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
    meta = {"started": t0, "finished": time.time(), "backend": kernels.BACKEND}
    _atomic_write(out / "metadata.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(json.dumps({"experiment": sc["experiment"], "param": args.param, "fitted_rate": rate,
                      "passed": summary["passed"], "out": str(out)}))
    return EXIT_OK if summary["passed"] else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="s1classes", description=__doc__.split("\n\n")[0],
                                 epilog="exit codes: 0 ok, 2 check failed, 3 input error. "
                                        "env: S1CLASSES_OUT (output dir), S1CLASSES_THREADS (sweep workers)")
    sub = ap.add_subparsers(dest="cmd", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $S1CLASSES_OUT or ./s1classes-out)")
    common.add_argument("--deterministic", action="store_true",
                        help="sequential execution and no wall-clock stopping; JSON output is byte-identical")
    common.add_argument("--max-iters", type=int, help="iteration cap of the variational solver")
    r = sub.add_parser("run", parents=[common], help="run one scenario")
    r.add_argument("file")
    s = sub.add_parser("sweep", parents=[common], help="repeat a scenario over a parameter list")
    s.add_argument("file")
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True, help="comma-separated list, fractions allowed (1/64)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return cmd_run(args) if args.cmd == "run" else cmd_sweep(args)
    except (InputError, S1Error) as exc:
        if isinstance(exc, NumericError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
