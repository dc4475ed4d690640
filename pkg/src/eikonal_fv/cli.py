"""
Command line entry point.

    eikonal-fv solve  --example EX1 [--shape 25] [--out DIR]
    eikonal-fv study  --example EX9 [--levels 16,24,32] [--repro]
    eikonal-fv mesh   --example EX3 --shape 24x24x8 --write mesh.poly [--vtk mesh.vtk]
    eikonal-fv mesh   --info mesh.poly
    eikonal-fv oracle --example EX3 --points pts.txt [--shape 24x24x8]

``--config FILE`` loads a JSON run configuration; flags override its fields.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, _parse_shape, config_from_dict, load_config, parse_levels, with_overrides
from .driver import EikonalSolver, StageSchedule
from .meshio import read_polymesh, write_polymesh, write_vtk
from .study import (OracleUnavailable, StudySettings, error_norms, make_mesh, reference_distance,
                    run_convergence_study)

THREADS_ENV = "EIKONAL_FV_THREADS"
log = logging.getLogger("eikonal_fv")


def set_threads(n):
    """Thread count for numba kernels: flag, then environment, then numba's default."""
    import warnings

    import numba

    if n is None:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else None
    with warnings.catch_warnings():
        # numba reports unusable optional threading layers at first use
        warnings.simplefilter("ignore", numba.NumbaWarning)
        if n is None:
            return numba.get_num_threads()
        n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
    return n


def _setup_logging(verbose, quiet):
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    h = logging.StreamHandler(sys.stderr)
    h.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger("eikonal_fv")
    root.handlers[:] = [h]
    root.setLevel(level)
    root.propagate = False


def _config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.example:
            raise ConfigError("use either --config or --example")
    elif args.example:
        cfg = config_from_dict({"example": args.example})
    else:
        raise ConfigError("need --config or --example")
    over = {}
    if getattr(args, "shape", None):
        over["shape"] = _parse_shape(args.shape)
    if getattr(args, "levels", None):
        over["levels"] = parse_levels(args.levels)
    if getattr(args, "out", None):
        over["output"] = args.out
    if getattr(args, "amplitude", None) is not None:
        over["amplitude"] = args.amplitude
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        over["threads"] = args.threads
    return with_overrides(cfg, **over)


def _mesh(cfg: RunConfig, shape=None):
    if cfg.mesh_file:
        return read_polymesh(cfg.mesh_file)
    if cfg.problem.domain is None:
        raise ConfigError("no mesh: give a domain or a mesh file")
    return make_mesh(cfg.problem.domain, shape or cfg.level_shape, cfg.amplitude, cfg.seed, cfg.problem.gamma)


# ----------------------------------------------------------------------
def cmd_solve(args):
    cfg = _config(args)
    set_threads(cfg.threads)
    mesh = _mesh(cfg)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    log.info("cells=%d faces=%d h=%.6e", mesh.n_cells, mesh.n_faces, mesh.h)
    solver = EikonalSolver(mesh, cfg.problem.gamma, cfg.solver)
    res = solver.run(StageSchedule.for_mesh(mesh, **cfg.schedule))
    summary = {"problem": cfg.problem.name, "cells": mesh.n_cells, "h": mesh.h,
               "iterations": res.iterations, "seeded": len(res.seeds),
               "final_residual": [s.residuals[-1] if s.residuals else None for s in res.stages]}
    fields = {"u": res.u, "seeded": res.pinned.astype(float)}
    if cfg.problem.domain is not None and not cfg.mesh_file:
        try:
            ref = reference_distance(cfg.problem, mesh.cell_centers, cfg.level_shape, cfg.oracle_factor)
            e1, einf = error_norms(mesh.cell_volumes, res.u, ref, res.pinned)
            summary.update(E1=e1, Einf=einf, reference=cfg.problem.oracle)
            fields["reference"] = ref
            fields["error"] = np.abs(res.u - ref)
        except OracleUnavailable as exc:
            log.warning("%s", exc)
    write_vtk(mesh, out / "solution.vtk", fields)
    np.save(out / "u.npy", res.u)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_study(args):
    cfg = _config(args)
    set_threads(cfg.threads)
    if len(cfg.problem.levels) < 2:
        raise ConfigError("a convergence study needs at least two levels")
    settings = StudySettings(schedule=cfg.schedule, solver=cfg.solver, amplitude=cfg.amplitude,
                             seed=cfg.seed, oracle_factor=cfg.oracle_factor)
    report = run_convergence_study(cfg.problem, settings)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv", repro=args.repro)
    (out / "report.txt").write_text(report.table() + "\n")
    print(report.table())
    return 0


def cmd_mesh(args):
    if args.info:
        mesh = read_polymesh(args.info)
    else:
        cfg = _config(args)
        mesh = _mesh(cfg)
    print(f"cells={mesh.n_cells} faces={mesh.n_faces} internal={len(mesh.internal_faces)} "
          f"vertices={mesh.n_vertices} h={mesh.h:.6e} volume={mesh.cell_volumes.sum():.12g} "
          f"min_volume={mesh.cell_volumes.min():.6e} closure={mesh.closure_defect.max():.3e}")
    if args.write:
        write_polymesh(mesh, args.write, binary=args.binary)
    if args.vtk:
        write_vtk(mesh, args.vtk, {"volume": mesh.cell_volumes})
    return 0


def cmd_oracle(args):
    cfg = _config(args)
    pts = np.loadtxt(args.points, ndmin=2) if args.points != "-" else np.loadtxt(sys.stdin, ndmin=2)
    if pts.shape[1] != 3:
        raise ConfigError("points file needs three columns")
    shape = cfg.level_shape if cfg.shape is None else cfg.shape
    vals = reference_distance(cfg.problem, pts, shape, cfg.oracle_factor)
    for p, v in zip(pts, vals):
        print(" ".join(format(c, ".17g") for c in p), format(float(v), ".17g"))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="eikonal-fv", description="Distance fields on polyhedral meshes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--example", help="benchmark preset EX1..EX10")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV})")
        p.add_argument("--amplitude", type=float, help="vertex perturbation, fraction of local spacing")
        p.add_argument("--seed", type=int)
        if out:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("solve", help="single run")
    common(p)
    p.add_argument("--shape", help="cells per axis, e.g. 25 or 24x24x8")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("study", help="convergence study")
    common(p)
    p.add_argument("--levels", help="e.g. 16,24,32 or 12x12x4;24x24x8")
    p.add_argument("--repro", action="store_true", help="deterministic report (no wall times)")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("mesh", help="generate or inspect a mesh")
    common(p, out=False)
    p.add_argument("--shape")
    p.add_argument("--info", help="poly-mesh file to inspect")
    p.add_argument("--write", help="write the mesh to this poly-mesh file")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--vtk", help="write the mesh (cell volumes) to a VTK file")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("oracle", help="reference distances at points")
    common(p, out=False)
    p.add_argument("--points", required=True, help="text file with x y z per line, or - for stdin")
    p.add_argument("--shape", help="solver grid the geodesic oracle is refined from")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    _setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except (ConfigError, OracleUnavailable, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
