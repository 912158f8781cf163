"""Command-line entry point.

Subcommands: potential, walk, bm, couple, kmt, escape-stats, validate, run.
Every data-producing subcommand assembles a RunManifest, validates it,
writes it next to the outputs, and is bit-reproducible from it (data files
carry no timestamps; the log does and is excluded from that contract).
CSV columns are fixed, floats carry 17 significant digits, lines end in LF.

The CONDWALK_THREADS environment variable caps worker threads (this build
aggregates per-replica summaries sequentially, so it is a hint).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import chains, diffusion, escape, excursions, kmt, potential
from .coupling import CouplingParams, catastrophe_survey, run_coupling, transcript_bound_check
from .manifest import RunDirectory, RunManifest, validate_manifest


def _apply_thread_cap() -> None:
    cap = os.environ.get("CONDWALK_THREADS")
    if cap:
        try:
            import numba

            numba.set_num_threads(max(1, min(int(cap), numba.get_num_threads())))
        except (ImportError, ValueError):
            pass


def _parse_site(text: str) -> tuple[int, int]:
    x, y = text.split(",")
    return (int(x), int(y))


def _parse_sites(text: str) -> list[tuple[int, int]]:
    return [_parse_site(p) for p in text.split(";") if p]


# ---------------------------------------------------------------------------
# subcommand implementations, all driven by a manifest
# ---------------------------------------------------------------------------

def _run_potential(man: RunManifest) -> dict:
    p = man.params
    x, y = int(p["x"]), int(p["y"])
    radius = int(p.get("radius", potential.DEFAULT_EXACT_RADIUS))
    table = (potential.default_table()
             if radius == potential.DEFAULT_EXACT_RADIUS
             else potential.potential_oracle(radius))
    out = {"x": x, "y": y, "a": potential.potential_a((x, y), table)}
    if p.get("avoid"):
        sites = [tuple(s) for s in p["avoid"]]
        av = potential.build_avoid_set(sites, radius, table)
        out["avoid_set"] = av.to_json()
        out["q"] = av.q(x, y)
        if not av.contains(x, y):
            out["escape_probability"] = chains.escape_probability((x, y), av)
    return out


def _run_walk(man: RunManifest, rundir: RunDirectory | None) -> dict:
    p = man.params
    spec = chains.ChainSpec(p.get("variant", "hat"))
    if spec.variant == "hat_a":
        sites = [tuple(s) for s in p["avoid"]]
        spec = chains.ChainSpec("hat_a", avoid_set=potential.build_avoid_set(
            sites, int(p.get("radius", potential.DEFAULT_EXACT_RADIUS))))
    start = tuple(p.get("start", (1, 0)))
    kind, arg = p["stop_rule"]
    if kind == "hits":
        arg = [tuple(s) for s in arg]
    summary = {"replicas": man.replicas, "lengths": [], "final_radii": []}
    for r in range(man.replicas):
        traj = chains.sample_path(spec, start, (kind, arg), man.seed, replica=r)
        summary["lengths"].append(len(traj) - 1)
        summary["final_radii"].append(float(traj.radii()[-1]))
        if rundir is not None:
            rundir.write_csv(
                f"walk_{r:04d}.csv", "n,x,y",
                ((n, int(s[0]), int(s[1])) for n, s in enumerate(traj.sites)),
            )
    return summary


def _run_bm(man: RunManifest, rundir: RunDirectory | None) -> dict:
    p = man.params
    spec = diffusion.DiffusionSpec(
        rho=float(p.get("rho", potential.RHO0)),
        dt=float(p.get("dt", 1e-3 * potential.RHO0 ** 2)),
        per_coordinate_variance=float(p.get("variance", 0.5)),
    )
    mode = p.get("mode", "hatw")
    summary = {"mode": mode, "replicas": man.replicas, "final_radii": []}
    for r in range(man.replicas):
        if mode == "hatw":
            ts, pts, clamps = diffusion.sample_hatW_direct(
                tuple(p.get("start", (1.0, 0.0))), spec,
                float(p.get("horizon", 100.0)), man.seed, replica=r)
            summary.setdefault("clamps", []).append(clamps)
        else:
            ts, pts = diffusion.sample_bm_path(
                tuple(p.get("start", (0.0, 0.0))), spec,
                ("time", float(p.get("horizon", 1.0))), man.seed, replica=r)
        summary["final_radii"].append(float(np.hypot(*pts[-1])))
        if rundir is not None:
            rows = ((float(t), float(q[0]), float(q[1])) for t, q in zip(ts, pts))
            rundir.write_csv(f"path_{r:04d}.csv", "t,x,y", rows)
    return summary


def _run_couple(man: RunManifest, rundir: RunDirectory | None) -> dict:
    p = man.params
    params = CouplingParams(
        h=int(p.get("h", 6)), D=float(p.get("D", 2.5)),
        beta=float(p.get("beta", 9.0)), alpha=float(p.get("alpha", 31.0)),
    )
    stop_level = int(p.get("levels", params.h + 2))
    geometry = excursions.LevelGeometry()
    summary = {
        "h": params.h, "stop_level": stop_level, "replicas": man.replicas,
        "warnings": params.warnings(), "catastrophes": 0, "runs": [],
    }
    level_tries: dict[int, int] = {}
    level_cats: dict[int, int] = {}
    for r in range(man.replicas):
        tr = run_coupling(params, stop_level, man.seed, run_index=r,
                          geometry=geometry)
        if rundir is not None:
            tr.to_csv(rundir.file(f"transcript_{r:04d}.csv"))
            rundir.write_csv(
                f"samples_{r:04d}.csv", "t,r_walk,r_bm",
                ((float(t), float(rs), float(rw)) for t, rs, rw in tr.ratio_samples),
            )
        entry = {"stop": tr.stop_reason, "steps": tr.steps()}
        if tr.stop_reason == "catastrophe":
            summary["catastrophes"] += 1
            entry["catastrophe_level"] = tr.catastrophe_level
        else:
            rep = transcript_bound_check(tr)
            entry["bounds_ok"] = rep["hard_ok"]
        summary["runs"].append(entry)
        for m, c in tr.level_try_counts.items():
            level_tries[m] = level_tries.get(m, 0) + c
        for m, c in tr.level_catastrophes.items():
            level_cats[m] = level_cats.get(m, 0) + c
    summary["per_level_p_hat"] = {
        str(m): level_cats.get(m, 0) / level_tries[m] for m in sorted(level_tries)
    }
    return summary


def _run_kmt(man: RunManifest, rundir: RunDirectory | None) -> dict:
    p = man.params
    exps = p.get("exponents", list(range(10, 17)))
    reps = man.replicas
    res = kmt.discrepancy_experiment(exps, reps, man.seed)
    if rundir is not None and p.get("dump_pair", True):
        pu = kmt.dyadic_couple_1d(1 << max(exps), man.seed, replica=0)
        pv = kmt.dyadic_couple_1d(1 << max(exps), man.seed, replica=1)
        kmt.coupled_pair_to_csv(kmt.lift_to_2d(pu, pv), rundir.file("pair_0000.csv"))
    return res


def _run_escape(man: RunManifest, rundir: RunDirectory | None) -> dict:
    p = man.params
    horizon = int(p.get("horizon", 10 ** 6))
    name = p.get("g", "const:0.45")
    if name.startswith("const:"):
        tf = escape.g_constant(float(name.split(":")[1]))
    elif name == "exp-half":
        tf = escape.g_exp_half()
    elif name == "zero":
        tf = escape.g_zero()
    else:
        raise ValueError(f"unknown test function {name!r}")
    spec = chains.ChainSpec("hat")
    ens = escape.ensemble_minima(spec, horizon, man.replicas, man.seed)
    rep = escape.integral_test_experiment(tf, horizon, man.replicas, man.seed,
                                          ensemble=ens)
    if p.get("lil", False) and horizon >= 2 * 10_000_000:
        rep["lil"] = escape.lil_running_max(horizon, man.replicas, man.seed,
                                            ensemble=ens)
    if rundir is not None:
        thr = tf.threshold(ens.grid)
        for r in range(ens.M.shape[0]):
            rows = ((int(n), float(M), float(t), float(M / t)) for n, M, t in
                    zip(ens.grid, ens.M[r], thr))
            rundir.write_csv(f"curve_{r:04d}.csv", "n,M_n,threshold,ratio", rows)
    return rep


def run(man: RunManifest, force: bool = False) -> dict:
    """Dispatch a manifest; write outputs if it names a directory."""
    issues = validate_manifest(man)
    fatal = [i for i in issues if "unknown subcommand" in i]
    if fatal:
        raise ValueError("; ".join(fatal))
    rundir = None
    result: dict
    if man.out:
        with RunDirectory(man.out, man, force=force) as rundir:
            result = _dispatch(man, rundir)
            result["diagnostics"] = issues
            rundir.write_json("summary.json", result)
            with open(rundir.file("run.log"), "w") as f:
                f.write(f"subcommand: {man.subcommand}\nseed: {man.seed}\n"
                        f"replicas: {man.replicas}\ndiagnostics: {issues}\n")
    else:
        result = _dispatch(man, None)
        result["diagnostics"] = issues
    return result


def _dispatch(man: RunManifest, rundir) -> dict:
    if man.subcommand == "potential":
        return _run_potential(man)
    if man.subcommand == "walk":
        return _run_walk(man, rundir)
    if man.subcommand == "bm":
        return _run_bm(man, rundir)
    if man.subcommand == "couple":
        return _run_couple(man, rundir)
    if man.subcommand == "kmt":
        return _run_kmt(man, rundir)
    if man.subcommand == "escape-stats":
        return _run_escape(man, rundir)
    raise ValueError(f"unknown subcommand {man.subcommand!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--out", type=str, default=None)
    sp.add_argument("--force", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="condwalk",
        description="conditioned planar walks and diffusions: samplers, "
                    "couplings, escape statistics",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("potential", help="potential kernel and avoided-set scale function")
    sp.add_argument("--x", type=int, required=True)
    sp.add_argument("--y", type=int, required=True)
    sp.add_argument("--avoid", type=str, default=None, help='sites "x,y;x,y" (origin required)')
    sp.add_argument("--radius", type=int, default=potential.DEFAULT_EXACT_RADIUS)
    _common(sp)

    sp = sub.add_parser("walk", help="sample conditioned lattice walks")
    sp.add_argument("--variant", choices=["srw", "hat", "hat_a"], default="hat")
    sp.add_argument("--start", type=str, default="1,0")
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--avoid", type=str, default=None)
    _common(sp)

    sp = sub.add_parser("bm", help="sample the plain or conditioned diffusion")
    sp.add_argument("--mode", choices=["bm", "hatw"], default="hatw")
    sp.add_argument("--start", type=str, default="1.0,0.0")
    sp.add_argument("--horizon", type=float, default=100.0)
    sp.add_argument("--variance", type=float, default=0.5)
    _common(sp)

    sp = sub.add_parser("couple", help="run the coupled excursion construction")
    sp.add_argument("--h", type=int, default=6)
    sp.add_argument("--levels", type=int, default=None, help="absolute stop level")
    sp.add_argument("--D", type=float, default=2.5)
    sp.add_argument("--beta", type=float, default=9.0)
    sp.add_argument("--alpha", type=float, default=31.0)
    _common(sp)

    sp = sub.add_parser("kmt", help="dyadic-coupling discrepancy experiments")
    sp.add_argument("--min-exp", type=int, default=10)
    sp.add_argument("--max-exp", type=int, default=16)
    _common(sp)

    sp = sub.add_parser("escape-stats", help="future-minima threshold experiments")
    sp.add_argument("--horizon", type=int, default=10 ** 6)
    sp.add_argument("--g", type=str, default="const:0.45",
                    help="const:<delta> | exp-half | zero")
    sp.add_argument("--lil", action="store_true")
    _common(sp)

    sp = sub.add_parser("validate", help="validate a manifest file")
    sp.add_argument("manifest", type=str)

    sp = sub.add_parser("run", help="execute a saved manifest")
    sp.add_argument("manifest", type=str)
    sp.add_argument("--force", action="store_true")

    return ap


def _manifest_from_args(args) -> RunManifest:
    cmd = args.cmd
    params: dict = {}
    if cmd == "potential":
        params = {"x": args.x, "y": args.y, "radius": args.radius}
        if args.avoid:
            params["avoid"] = [list(s) for s in _parse_sites(args.avoid)]
    elif cmd == "walk":
        if args.steps is not None:
            stop = ["steps", args.steps]
        elif args.radius is not None:
            stop = ["radius", args.radius]
        else:
            stop = ["steps", 1000]
        params = {"variant": args.variant, "start": list(_parse_site(args.start)),
                  "stop_rule": stop}
        if args.avoid:
            params["avoid"] = [list(s) for s in _parse_sites(args.avoid)]
    elif cmd == "bm":
        x, y = args.start.split(",")
        params = {"mode": args.mode, "start": [float(x), float(y)],
                  "horizon": args.horizon, "variance": args.variance}
    elif cmd == "couple":
        params = {"h": args.h, "D": args.D, "beta": args.beta, "alpha": args.alpha}
        if args.levels is not None:
            params["levels"] = args.levels
    elif cmd == "kmt":
        params = {"exponents": list(range(args.min_exp, args.max_exp + 1))}
    elif cmd == "escape-stats":
        params = {"horizon": args.horizon, "g": args.g, "lil": args.lil}
    return RunManifest(subcommand=cmd, params=params, seed=args.seed,
                       replicas=args.replicas, out=args.out)


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    if args.cmd == "validate":
        with open(args.manifest) as f:
            man = RunManifest.from_json(json.load(f))
        issues = validate_manifest(man)
        print(json.dumps({"diagnostics": issues}, indent=2))
        return 0
    if args.cmd == "run":
        with open(args.manifest) as f:
            man = RunManifest.from_json(json.load(f))
        result = run(man, force=args.force)
        print(json.dumps(result, indent=2, sort_keys=True, default=float))
        return 0
    man = _manifest_from_args(args)
    result = run(man, force=getattr(args, "force", False))
    print(json.dumps(result, indent=2, sort_keys=True, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
