"""Command-line entry point: ``coflow <subcommand>`` or ``coflow run config.toml``.

Every subcommand builds the same structured config a TOML file would hold, so
flags and files go through one validator.  Exit status: 0 when every check
passes, 1 when a check fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance, bounds, rng, sde_motion, web_oracle
from .config import ConfigError, ExperimentConfig, content_hash, load_config, parse_config
from .dual import BackwardFlowRealization, BoundaryError, check_backward_evolution, check_cocycles, check_duality, check_shift_equivariance
from .flow_lattice import check_axioms, simulate_flow
from .report import write_csv, write_report

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------- experiment bodies
# each returns (results, checks, csv_rows)


def _simulate(cfg: ExperimentConfig):
    p, seed = cfg.params, cfg.experiment.seed
    rows, flows = [], []
    for r in range(p.replicas):
        flow = simulate_flow(cfg.lattice, cfg.drift, seed, replica=r)
        flows.append(flow)
        for k, f in enumerate(flow.step_maps):
            rows.append({"replica": r, "step": k, "breakpoints": f.n_breakpoints, "distinct_values": int(f.vals.size)})
        if p.dump:
            path = Path(p.dump)
            target = path if p.replicas == 1 else path.with_name(f"{path.stem}_{r}{path.suffix}")
            target.write_text(flow.dumps())
    res = {"replicas": p.replicas, "flagged": [f.flagged for f in flows],
           "final_images": [int(np.unique(f.map_between(0, f.n_steps).vals).size) for f in flows]}
    return res, {}, rows


def _verify(cfg: ExperimentConfig):
    p, seed = cfg.params, cfg.experiment.seed
    out, checks, rows = {}, {}, []
    for r in range(p.replicas):
        flow = simulate_flow(cfg.lattice, cfg.drift, seed, replica=r)
        ax = check_axioms(flow, n_triples=p.n_triples, seed=r)
        dual = BackwardFlowRealization(flow)
        reps = {
            "duality": check_duality(flow, dual, p.duality_samples, seed=r),
            "evolution": check_backward_evolution(dual, p.evolution_triples, seed=r),
            "equivariance": check_shift_equivariance(flow, p.shift, p.shift_samples, seed=r),
            "cocycle": check_cocycles(flow, p.cocycle_samples, seed=r),
        }
        out[str(r)] = {"axioms": ax.to_dict(), **{k: v.to_dict() for k, v in reps.items()}}
        checks[f"replica{r}.axioms_exact"] = ax.c1_violations == ax.c4_violations == ax.c5_violations == ax.monotonicity_violations == 0
        for k, v in reps.items():
            checks[f"replica{r}.{k}"] = v.violations - v.tie_violations == 0
        rows.append({"replica": r, "c1": ax.c1_violations, "c4": ax.c4_violations, "c5": ax.c5_violations,
                     "c3_pitch": ax.c3_range_pitch, **{k: v.violations for k, v in reps.items()}})
    return out, checks, rows


def _dual(cfg: ExperimentConfig):
    p = cfg.params
    flow = simulate_flow(cfg.lattice, cfg.drift, cfg.experiment.seed, replica=p.replica)
    dual = BackwardFlowRealization(flow, rule=p.rule)
    rows = []
    for q in p.queries:
        if len(q) != 3:
            raise ConfigError("[dual] queries: each query is [t, s, y]")
        t, s, y = (float(v) for v in q)
        try:
            v = dual(t, s, y)
        except BoundaryError as e:
            v = math.nan
            tag = f"outside window: {e}"
        else:
            try:
                tag = dual.tag(t, y).tag
            except BoundaryError:
                tag = "undecided (needs a step after the window)"
        rows.append({"t": t, "s": s, "y": y, "value": v, "tag": tag})
    return {"queries": rows, "ties": [list(x) for x in dual.ties]}, {}, rows


def _estimate(cfg: ExperimentConfig):
    p, seed = cfg.params, cfg.experiment.seed
    if p.survival:
        a, b = p.interval
        method = "determinant" if cfg.drift.kind == "zero" else "paths"
        est = sde_motion.estimate_ordered_survival(p.n, p.start, a, b, cfg.drift, p.t, p.N, seed, method, p.dt)
    else:
        box = [sde_motion.Interval(float(lo), float(hi)) for lo, hi in p.box]
        est = sde_motion.estimate_transition(p.n, p.start, cfg.drift, p.t, box, p.N, seed, p.dt)
    return est.row(), {}, [est.row()]


def _dualcheck(cfg: ExperimentConfig):
    p, seed = cfg.params, cfg.experiment.seed
    if p.mode == "drift":
        res = sde_motion.check_dual_drift(cfg.drift, p.t, p.y, p.N, seed, dt=p.dt)
        return res, {"ks": res["ok"]}, [res]
    est = sde_motion.estimate_dual_relation(len(p.xs), p.xs, p.ys, cfg.drift, p.t, p.N, seed, p.dt)
    row = est.to_dict()
    return row, {"relation_3se": est.ok}, [row]


def _tpcheck(cfg: ExperimentConfig):
    res = sde_motion.tp_checks(cfg.drift, cfg.params.N, cfg.experiment.seed, cfg.params.dt)
    return res, {k: v["ok"] for k, v in res.items()}, [dict(name=k, **{kk: vv for kk, vv in v.items() if kk != "ok"}, ok=v["ok"]) for k, v in res.items()]


def _bounds(cfg: ExperimentConfig):
    p = cfg.params
    profile = bounds.BoundsProfile(p.alpha, p.beta, p.horizon, cfg.drift, p.p, p.C)
    sched = bounds.liminf_schedule(profile, p.n_max)
    return sched, {"falls_1e3": sched["final_below_1e-3_of_first"]}, sched["rows"]


def _web(cfg: ExperimentConfig):
    p = cfg.params
    window = web_oracle.WebWindow(p.T, 0, p.Z - 1)
    if p.mode == "enumerate":
        rep = web_oracle.exhaustive_check(window, embed=p.embed)
    else:
        rep = web_oracle.sampled_check(window, p.samples, cfg.experiment.seed, embed=p.embed)
    rels = []
    if window.n_configs <= web_oracle.MAX_ENUMERATED:
        for t in range(1, window.T + 1):
            for xs, ys in web_oracle.interlaced_cases(window, t, 1):
                rels.append(web_oracle.web_duality_relation(window, xs, ys, t))
    checks = {"web": rep.ok, "duality_relations": all(r["equal"] for r in rels)}
    return {"report": rep.to_dict(), "relations": rels}, checks, rels


def _acceptance(cfg: ExperimentConfig):
    p = cfg.params
    sizes = acceptance.QUICK if p.quick else acceptance.FULL
    res = acceptance.run_acceptance(cfg.experiment.seed, p.criteria, sizes, echo=print)
    results = {str(c): {"passed": r.passed, "summary_line": None, "results": r.results} for c, r in res.items()}
    checks = {f"criterion_{c}": r.passed for c, r in res.items()}
    timing = {f"criterion_{c}": {"seconds": r.runtime, "runtime_ok": r.runtime_ok} for c, r in res.items()}
    rows = [{"criterion": c, "title": acceptance.TITLES[c], "passed": r.ok} for c, r in res.items()]
    for c, r in res.items():
        results[str(c)]["summary_line"] = r.summary
    return results, checks, rows, timing, all(r.ok for r in res.values())


BODIES = {"simulate": _simulate, "verify": _verify, "dual": _dual, "estimate": _estimate, "dualcheck": _dualcheck,
          "tpcheck": _tpcheck, "bounds": _bounds, "web": _web}


def execute(cfg: ExperimentConfig) -> int:
    if "COFLOW_THREADS" not in os.environ:
        os.environ["COFLOW_THREADS"] = str(cfg.experiment.threads)
    t0 = time.perf_counter()
    timing, runtime_ok = {}, True
    try:
        if cfg.kind == "acceptance":
            results, checks, rows, timing, runtime_ok = _acceptance(cfg)
        else:
            results, checks, rows = BODIES[cfg.kind](cfg)
    except ConfigError:
        raise
    except ValueError as e:
        # parameter combinations only the model can reject (for example off-lattice times)
        raise ConfigError(str(e)) from None
    timing["total_seconds"] = time.perf_counter() - t0
    ok = all(checks.values()) and runtime_ok
    report = {
        "config": cfg.raw,
        "input_hash": content_hash(cfg.raw),
        "seed": cfg.experiment.seed,
        "results": results,
        "checks": checks,
        "ok": ok,
        "timing": timing,
    }
    write_report(cfg.experiment.out, report)
    if cfg.experiment.csv:
        write_csv(cfg.experiment.csv, rows)
    status = "ok" if ok else "FAILED: " + ", ".join(k for k, v in checks.items() if not v) if checks else "ok"
    print(f"{cfg.kind}: {status}; report {cfg.experiment.out}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- argument parsing


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_common(sp, lattice: bool, drift: bool) -> None:
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", default="report.json")
    sp.add_argument("--csv", default="")
    if lattice:
        sp.add_argument("--t0", type=float, default=0.0)
        sp.add_argument("--steps", type=int, default=100)
        sp.add_argument("--dt", type=float, default=0.01)
        sp.add_argument("--x-min", type=float, default=-3.0)
        sp.add_argument("--x-max", type=float, default=3.0)
        sp.add_argument("--dx", type=float, default=0.01)
        sp.add_argument("--margin", type=float, default=1.0)
    if drift:
        sp.add_argument("--drift", default="zero", help="zero | constant | linear | sine")
        sp.add_argument("--params", type=_floats, default=[], help="comma-separated drift parameters")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coflow", description="Coalescing flows, their duals and the checks around them.")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("run", help="run an experiment described by a TOML file")
    sp.add_argument("config")

    sp = sub.add_parser("simulate", help="simulate flow realizations on a lattice")
    _add_common(sp, True, True)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--dump", default="")

    sp = sub.add_parser("verify", help="axiom and duality checks on simulated flows")
    _add_common(sp, True, True)
    sp.add_argument("--replicas", type=int, default=4)

    sp = sub.add_parser("dual", help="evaluate the dual flow at [t, s, y] queries")
    _add_common(sp, True, True)
    sp.add_argument("--replica", type=int, default=0)
    sp.add_argument("--query", action="append", type=_floats, default=[], help="t,s,y")
    sp.add_argument("--rule", default="regular")

    sp = sub.add_parser("estimate", help="Monte Carlo n-point transition or ordered-survival probability")
    _add_common(sp, False, True)
    sp.add_argument("--start", type=_floats, required=True)
    sp.add_argument("--box", action="append", type=_floats, default=[], help="lo,hi per coordinate")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--N", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--survival", type=_floats, default=None, help="a,b: estimate ordered survival inside [a, b]")

    sp = sub.add_parser("dualcheck", help="dual one-point law or interlaced duality relation")
    _add_common(sp, False, True)
    sp.add_argument("--mode", default="drift", choices=["drift", "relation"])
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--y", type=float, default=0.1)
    sp.add_argument("--xs", type=_floats, default=[0.0])
    sp.add_argument("--ys", type=_floats, default=[0.1])
    sp.add_argument("--N", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=2e-3)

    sp = sub.add_parser("tpcheck", help="sample-level transition-probability checks")
    _add_common(sp, False, True)
    sp.add_argument("--N", type=int, default=10_000)
    sp.add_argument("--dt", type=float, default=1e-3)

    sp = sub.add_parser("bounds", help="schedule ratio table")
    _add_common(sp, False, True)
    sp.add_argument("--alpha", type=float, default=-1.0)
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--n-max", type=int, default=20)

    sp = sub.add_parser("web", help="discrete web oracle")
    _add_common(sp, False, False)
    sp.add_argument("--mode", default="enumerate", choices=["enumerate", "sample"])
    sp.add_argument("--T", type=int, default=4)
    sp.add_argument("--Z", type=int, default=8)
    sp.add_argument("--samples", type=int, default=10_000)
    return ap


def args_to_raw(a: argparse.Namespace) -> dict:
    raw = {"experiment": {"kind": a.command, "seed": a.seed, "threads": a.threads, "out": a.out, "csv": a.csv}}
    if hasattr(a, "steps"):
        raw["lattice"] = {"t0": a.t0, "n_steps": a.steps, "dt": a.dt, "x_min": a.x_min, "x_max": a.x_max, "dx": a.dx, "margin": a.margin}
    if hasattr(a, "drift"):
        raw["drift"] = {"kind": a.drift, "params": a.params}
    c = a.command
    if c == "simulate":
        raw[c] = {"replicas": a.replicas, "dump": a.dump}
    elif c == "verify":
        raw[c] = {"replicas": a.replicas}
    elif c == "dual":
        raw[c] = {"replica": a.replica, "queries": a.query, "rule": a.rule}
    elif c == "estimate":
        raw[c] = {"n": len(a.start), "start": a.start, "t": a.t, "N": a.N, "dt": a.dt,
                  "box": a.box or [[-math.inf, math.inf]] * len(a.start)}
        if a.survival is not None:
            raw[c].update(survival=True, interval=a.survival)
    elif c == "dualcheck":
        raw[c] = {"mode": a.mode, "t": a.t, "y": a.y, "xs": a.xs, "ys": a.ys, "N": a.N, "dt": a.dt}
    elif c == "tpcheck":
        raw[c] = {"N": a.N, "dt": a.dt}
    elif c == "bounds":
        raw[c] = {"alpha": a.alpha, "beta": a.beta, "C": a.C, "n_max": a.n_max}
    elif c == "web":
        raw[c] = {"mode": a.mode, "T": a.T, "Z": a.Z, "samples": a.samples}
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.command == "run" else parse_config(args_to_raw(args))
        rng.n_threads()  # validates COFLOW_THREADS early
        return execute(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        if "COFLOW_THREADS" in str(e):
            print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
