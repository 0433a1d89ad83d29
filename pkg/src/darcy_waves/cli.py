"""Command line entry point: ``darcy-waves <mode> --config <path> [--out <dir>] [--seed <int>]``."""
from __future__ import annotations

import argparse
import csv
import logging
import shutil
import sys
import time
import traceback
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io, plotting
from .config import MODES, ConfigError, RunConfig, forcing_profile, load_config
from .continuation import StepConfig, StopConfig, continue_branch
from .curvature import mean_curvature
from .dtn import build_workspace, reconstruct_bulk
from .dynamics import EvolutionConfig, Forcing, evolve
from .errors import DarcyWavesError
from .smallwave import solve_small_wave, surface_tension_limit
from .spectral import GridFunction, discrete_norms, project_mean_zero
from .verify import run_suite

log = logging.getLogger("darcy_waves")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _norm_record(eta: GridFunction) -> Dict[str, float]:
    return discrete_norms(eta)._asdict()


def _small_wave(cfg: RunConfig, out: Path, rec: Dict) -> int:
    p = cfg.params
    phi = forcing_profile(cfg)
    rep = solve_small_wave(cfg.kappa * phi, p, tol=cfg.tol, max_iter=cfg.max_iter, nz=cfg.nz)
    eta = rep.solution
    rec["files"].append(io.write_profile(out / "profile.csv", eta))
    ws = build_workspace(eta, p.depth, cfg.nz)
    surface = p.gravity * eta + cfg.kappa * phi
    if p.sigma:
        surface = surface + p.sigma * mean_curvature(eta)
    bulk = reconstruct_bulk(ws, project_mean_zero(surface), gravity=p.gravity)
    rec["files"].append(io.write_bulk(out / "bulk.csv", bulk))
    rec["results"] = {"iterations": rep.iterations, "contraction_ratios": rep.contraction_ratios,
                      "final_residual": rep.final_residual, "norms": _norm_record(eta),
                      "bulk_max_divergence": bulk.max_divergence()}
    rec["plots"] = {"profiles": ["profile.csv"]}
    return EXIT_OK


def _sweep(cfg: RunConfig, out: Path, rec: Dict) -> int:
    rows, eta0 = surface_tension_limit(forcing_profile(cfg), cfg.kappa, cfg.params.gravity, cfg.params.speed,
                                       cfg.params.depth, cfg.sigmas, tol=cfg.tol, nz=cfg.nz)
    names = ["profile_sigma0.csv"]
    rec["files"].append(io.write_profile(out / names[0], eta0))
    for i, r in enumerate(rows):
        names.append(f"profile_sigma{i + 1}.csv")
        rec["files"].append(io.write_profile(out / names[-1], r.eta))
    rec["files"].append(io.write_table(out / "sweep.csv", ("sigma", "difference"),
                                       [(r.sigma, r.difference) for r in rows]))
    diffs = [r.difference for r in rows]
    rec["results"] = {"sigmas": cfg.sigmas, "differences": diffs,
                      "strictly_decreasing": all(b < a for a, b in zip(diffs, diffs[1:]))}
    rec["plots"] = {"profiles": names}
    return EXIT_OK


def _continue(cfg: RunConfig, out: Path, rec: Dict) -> int:
    c = cfg.continuation
    step = StepConfig(initial_step=c["initial_step"], max_step=c["max_step"], min_step=c["min_step"],
                      accept_tol=cfg.accept_tol, direction=c["direction"], max_n=c["max_n"], nz=cfg.nz)
    stop = StopConfig(c1_max=c["c1_max"], clearance_fraction=c["clearance_fraction"], kappa_max=c["kappa_max"],
                      max_points=c["max_points"])
    trace = continue_branch(forcing_profile(cfg), cfg.params, step, stop,
                            progress=lambda p: log.info("kappa=%.6g c1=%.4g residual=%.2e", p.kappa,
                                                        p.diagnostics.c1_norm, p.diagnostics.residual_sup))
    rec["files"].append(io.write_branch(out / "branch.csv", trace.points))
    (out / "profiles").mkdir(exist_ok=True)
    for i, pt in enumerate(trace.points):
        rec["files"].append(io.write_profile(out / "profiles" / f"point_{i:04d}.csv", pt.eta))
    rec["termination"] = trace.termination.value
    rec["grid"]["n_history"] = trace.grid_sizes
    rec["results"] = {"points": len(trace.points), "message": trace.message, "anomalies": trace.anomalies,
                      "kappa_crossings": trace.kappa_crossings, "origin_energy": trace.origin_energy,
                      "elapsed": trace.elapsed, "final_kappa": trace.points[-1].kappa}
    last = len(trace.points) - 1
    rec["plots"] = {"branch": "branch.csv",
                    "profiles": sorted({f"profiles/point_{i:04d}.csv" for i in (0, last // 2, last)})}
    return EXIT_FAIL if trace.anomalous else EXIT_OK


def _evolve(cfg: RunConfig, out: Path, rec: Dict) -> int:
    p, ev = cfg.params, cfg.evolve
    phi = forcing_profile(cfg)
    if ev["initial"] == "small-wave":
        eta0 = solve_small_wave(cfg.kappa * phi, p, tol=cfg.tol, max_iter=cfg.max_iter, nz=cfg.nz).solution
    elif ev["initial"] == "profile":
        eta0 = ev["amplitude"] * phi
    else:
        eta0 = GridFunction.zeros(cfg.n)
    reference = eta0
    if ev["noise"]:
        rng = np.random.default_rng(cfg.seed)
        eta0 = project_mean_zero(eta0 + GridFunction(ev["noise"] * rng.standard_normal(cfg.n)))
    ecfg = EvolutionConfig(dt=ev["dt"], T=ev["T"], scheme=ev["scheme"], forcing=Forcing(cfg.kappa, phi),
                           sample_every=ev["sample_every"], nz=cfg.nz)
    traj = evolve(eta0, ecfg, p)
    rec["files"].extend(io.write_trajectory(out / "trajectory", traj, reference, p.speed))
    drift = [row[-1] for row in io.timeseries_rows(traj, reference, p.speed)]
    rec["results"] = {"samples": len(traj), "stopped": traj.stopped, "final_time": traj.times[-1],
                      "max_drift": max(drift), "final_drift": drift[-1],
                      "max_abs_mean": max(abs(s.mean()) for s in traj.states)}
    rec["plots"] = {"timeseries": "trajectory/timeseries.csv",
                    "profiles": [f"trajectory/profile_{i:05d}.csv" for i in (0, len(traj) - 1)]}
    return EXIT_OK


def _verify(cfg: RunConfig, out: Path, rec: Dict) -> int:
    checks = run_suite(cfg.seed or 0)
    path = out / "verify.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "value", "threshold", "passed", "seconds"])
        for c in checks:
            w.writerow([c.name, f"{c.value:.17g}", f"{c.threshold:.17g}", c.passed, f"{c.seconds:.3f}"])
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (threshold {c.threshold:.1e})")
    rec["files"].append(path)
    failed = [c.name for c in checks if not c.passed]
    rec["results"] = {"checks": len(checks), "failed": failed}
    return EXIT_OK if not failed else EXIT_FAIL


DISPATCH = {"small-wave": _small_wave, "sweep-sigma": _sweep, "continue": _continue, "evolve": _evolve,
            "verify": _verify}


def run(cfg: RunConfig, config_path: Optional[Path] = None) -> int:
    """Execute one run; writes artifacts and a manifest into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_IO
    rec: Dict = {"mode": cfg.mode, "config": cfg.to_dict(), "seed": cfg.seed, "versions": io.software_versions(),
                 "grid": {"n": cfg.n, "nz": cfg.nz},
                 "tolerances": {"tol": cfg.tol, "accept_tol": cfg.accept_tol, "max_iter": cfg.max_iter},
                 "notices": cfg.notices, "files": [], "termination": None, "status": "running"}
    if config_path is not None:
        shutil.copyfile(config_path, out / "config.toml")
        rec["files"].append(out / "config.toml")
    t0 = time.perf_counter()
    try:
        code = DISPATCH[cfg.mode](cfg, out, rec)
        rec["status"] = "ok" if code == EXIT_OK else "failed"
    except (DarcyWavesError, ValueError) as exc:
        code = EXIT_FAIL
        rec["status"] = "error"
        rec["diagnostics"] = {"error": type(exc).__name__, "message": str(exc),
                              "residual": getattr(exc, "residual", None), "ratio": getattr(exc, "ratio", None),
                              "traceback": traceback.format_exc()}
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    rec["timings"] = {"total_seconds": time.perf_counter() - t0}
    if rec.get("termination") is None and rec["status"] in ("ok", "failed"):
        rec["termination"] = "completed"
    try:
        plots = rec.pop("plots", None)
        if plots:
            script = plotting.gnuplot_script(plots.get("profiles", ()), plots.get("branch"),
                                             plots.get("timeseries"), title=cfg.mode)
            (out / "plot.gp").write_text(script)
            rec["files"].append(out / "plot.gp")
            if cfg.render:
                rec["files"].extend(plotting.render(out, plots.get("profiles", ()), plots.get("branch"),
                                                    plots.get("timeseries"), title=cfg.mode))
        rec["files"] = [str(Path(f).relative_to(out)) if Path(f).is_relative_to(out) else str(f)
                        for f in rec["files"]]
        io.write_manifest(out / "manifest.json", rec)
    except OSError as exc:
        print(f"error: writing outputs to {out} failed: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="darcy-waves", description="Traveling capillary-gravity waves in Darcy flow.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    ap.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="seed for random perturbations and verify draws")
    ap.add_argument("--no-render", action="store_true", help="write the gnuplot script only, no PNGs")
    ap.add_argument("-q", "--quiet", action="store_true")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.mode)
    except FileNotFoundError:
        print(f"error: config file {args.config} not found", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        cfg.out_dir = str(args.out)
    cfg.seed = args.seed
    if args.no_render:
        cfg.render = False
    return run(cfg, args.config)


if __name__ == "__main__":
    sys.exit(main())
