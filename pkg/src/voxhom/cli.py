"""Command-line front end: generate | voxelize | solve | sweep | bench.

Every run writes its fully-resolved configuration next to its outputs, so a
result directory is always reproducible from itself.  Exit codes: 0 when all
solves converged, 2 when a run finished but left something unconverged, 1 on
any error.  The VOXHOM_OUT and VOXHOM_THREADS environment variables override
the config file but not explicit flags.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .green import SeriesConvergenceError, VARIANTS, make_green
from .grid import SpectralSymmetryError, make_grid
from .io import (
    ENV_OUT,
    FormatError,
    KIND_FIELD,
    KIND_PHASE,
    RunConfig,
    apply_env_overrides,
    bench_csv,
    parse_loading,
    parse_phase,
    parse_reference,
    read_config,
    read_sphere_pack,
    read_voxel_file,
    solve_csv,
    sweep_csv,
    write_config,
    write_sphere_pack,
    write_voxel_file,
)
from .microstructure import (
    ContrastError,
    Microstructure,
    PackingError,
    build_coefficients,
    generate_hard_spheres,
    rasterize_spheres,
)
from .operator import SystemOperator
from .plots import plot_bench, plot_microstructure, plot_residuals, plot_sweep
from .solvers import (
    DivergenceError,
    SolveConfig,
    reconstruct_strain,
    solve,
)
from .study import bench as run_bench
from .study import convergence_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNCONVERGED = 2


def _int_list(text: str):
    return [int(x) for x in text.replace(",", " ").split()]


def _add_problem_args(sub):
    sub.add_argument("--config", help="key=value run config; flags override it")
    sub.add_argument("--micro", help="voxel file with the fine phase map")
    sub.add_argument("--physics", choices=("conduction", "elasticity"))
    sub.add_argument("--phase", action="append", dest="phases", metavar="ENTRY",
                     help="catalog entry, 'a=<v>' or 'mu=<v> nu=<v>'; repeat "
                          "per phase in index order")
    sub.add_argument("--a0", help="reference medium, same syntax as --phase")
    sub.add_argument("--variant", choices=VARIANTS)
    sub.add_argument("--solver", choices=("cg", "fixed-point"))
    sub.add_argument("--rel-tol", type=float, dest="rel_tol")
    sub.add_argument("--max-iter", type=int, dest="max_iter")
    sub.add_argument("--loading", help="'e1', 'shear=xy', or components")
    sub.add_argument("--ns", help="solve grid sides, e.g. '16,32,64'")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--threads", type=int)
    sub.add_argument("--series-n-max", type=int, dest="series_n_max")
    sub.add_argument("--series-tol", type=float, dest="series_tol")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxhom",
        description="Homogenized coefficients of periodic voxel "
                    "microstructures by spectral solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="pack spheres and rasterize them")
    gen.add_argument("--n", type=int, required=True, help="sphere count")
    gen.add_argument("--r", type=float, required=True, help="sphere radius")
    gen.add_argument("--gap", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--nref", type=int, required=True,
                     help="fine grid voxels per side")
    gen.add_argument("--max-steps", type=int, default=200_000)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    vox = sub.add_parser("voxelize", help="rasterize an existing sphere pack")
    vox.add_argument("--pack", required=True)
    vox.add_argument("--nref", type=int, required=True)
    vox.add_argument("--out")
    vox.set_defaults(func=cmd_voxelize)

    slv = sub.add_parser("solve", help="corrector solve on one or more grids")
    _add_problem_args(slv)
    slv.add_argument("--save-fields", action="store_true",
                     help="write polarization and strain voxel files")
    slv.set_defaults(func=cmd_solve)

    swp = sub.add_parser("sweep", help="grid-refinement sweep with a rate fit")
    _add_problem_args(swp)
    swp.add_argument("--reference", type=float, dest="reference_value",
                     help="analytic target; defaults to the finest grid")
    swp.set_defaults(func=cmd_sweep)

    ben = sub.add_parser("bench", help="wall-time and efficiency table")
    _add_problem_args(ben)
    ben.add_argument("--threads-list", default="1",
                     help="thread counts starting at the P=1 baseline")
    ben.add_argument("--repeats", type=int, default=1)
    ben.set_defaults(func=cmd_bench)
    return parser


def _out_dir(explicit):
    out = explicit or os.environ.get(ENV_OUT) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_config(args) -> RunConfig:
    cfg = read_config(args.config) if args.config else RunConfig()
    apply_env_overrides(cfg)
    for key in ("micro", "physics", "a0", "variant", "solver", "rel_tol",
                "max_iter", "loading", "out", "threads", "series_n_max",
                "series_tol"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "phases", None):
        cfg.phases = list(args.phases)
    if getattr(args, "ns", None):
        cfg.ns = _int_list(args.ns)
    if getattr(args, "reference_value", None) is not None:
        cfg.reference_value = args.reference_value
    cfg.validate()
    return cfg


def _load_problem(cfg: RunConfig):
    grid, phase, kind = read_voxel_file(cfg.micro)
    if kind != KIND_PHASE:
        raise FormatError("%s holds %s data, need a phase map"
                          % (cfg.micro, kind))
    catalog = [parse_phase(cfg.physics, entry, grid.d) for entry in cfg.phases]
    micro = Microstructure(grid, phase, catalog)
    ref = parse_reference(cfg.physics, cfg.a0, grid.d)
    p = parse_loading(cfg.physics, cfg.loading, grid.d)
    return micro, ref, p


def cmd_generate(args) -> int:
    out = _out_dir(args.out)
    pack = generate_hard_spheres(args.n, args.r, gap=args.gap, seed=args.seed,
                                 max_steps=args.max_steps)
    phase = rasterize_spheres(pack, args.nref)
    write_sphere_pack(os.path.join(out, "pack.txt"), pack)
    write_voxel_file(os.path.join(out, "micro.vox"), make_grid(3, args.nref),
                     phase, KIND_PHASE)
    plot_microstructure(phase, os.path.join(out, "micro.png"))
    print("packed %d spheres (r=%g): nominal volume fraction %.4f, "
          "voxelized %.4f at N_ref=%d"
          % (pack.count, pack.r, pack.volume_fraction(), phase.mean(),
             args.nref))
    print("wrote %s and %s" % (os.path.join(out, "pack.txt"),
                               os.path.join(out, "micro.vox")))
    return EXIT_OK


def cmd_voxelize(args) -> int:
    out = _out_dir(args.out)
    pack = read_sphere_pack(args.pack)
    phase = rasterize_spheres(pack, args.nref)
    write_voxel_file(os.path.join(out, "micro.vox"), make_grid(3, args.nref),
                     phase, KIND_PHASE)
    plot_microstructure(phase, os.path.join(out, "micro.png"))
    print("voxelized %d spheres at N_ref=%d: volume fraction %.4f"
          % (pack.count, args.nref, phase.mean()))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg.out)
    cfg.out = out
    micro, ref, p = _load_problem(cfg)
    scfg = SolveConfig(cfg.solver, cfg.rel_tol, cfg.max_iter)
    reports = []
    last = None
    code = EXIT_OK
    for n in cfg.ns:
        coeff = build_coefficients(micro, ref, n)
        green = make_green(cfg.variant, ref, coeff.grid, **cfg.green_opts())
        op = SystemOperator(coeff, green, threads=cfg.threads)
        tau, report = solve(op, p, scfg)
        reports.append(report)
        last = (tau, op)
        print("N=%d: %s %s, %d iterations, residual %.3e, A*p = %s"
              % (n, cfg.variant, cfg.solver, report.iterations,
                 report.residual, np.array2string(report.column, precision=6)))
        if not report.converged:
            code = EXIT_UNCONVERGED
            print("N=%d did not converge within %d iterations"
                  % (n, cfg.max_iter), file=sys.stderr)
    solve_csv(os.path.join(out, "solve.csv"), reports)
    write_config(os.path.join(out, "resolved.cfg"), cfg)
    plot_residuals(reports, os.path.join(out, "residuals.png"))
    if args.save_fields and last is not None:
        tau, op = last
        write_voxel_file(os.path.join(out, "tau.vox"), tau.grid, tau.data,
                         KIND_FIELD)
        strain = reconstruct_strain(tau, p, op.green, threads=cfg.threads)
        write_voxel_file(os.path.join(out, "strain.vox"), strain.grid,
                         strain.data, KIND_FIELD)
    return code


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg.out)
    cfg.out = out
    micro, ref, p = _load_problem(cfg)
    scfg = SolveConfig(cfg.solver, cfg.rel_tol, cfg.max_iter)
    result = convergence_sweep(micro, ref, cfg.variant, cfg.ns, p, scfg,
                               reference=cfg.reference_value,
                               green_opts=cfg.green_opts(),
                               threads=cfg.threads)
    sweep_csv(os.path.join(out, "sweep.csv"), result)
    write_config(os.path.join(out, "resolved.cfg"), cfg)
    plot_sweep(result, os.path.join(out, "sweep.png"))
    for row in result.rows:
        print("N=%d: value %.8g, %d iterations" % (row.n, row.scalar,
                                                   row.iterations))
    if result.fit is not None:
        print("fitted rate: error ~ h^%.3f (log-log misfit %.2e)"
              % (result.fit.alpha, result.fit.residual))
    else:
        print("no rate fit: need at least 3 grids with positive error")
    if result.aborted:
        print("sweep stopped early: N=%d did not converge"
              % result.rows[-1].n, file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg.out)
    cfg.out = out
    micro, ref, p = _load_problem(cfg)
    scfg = SolveConfig(cfg.solver, cfg.rel_tol, cfg.max_iter)
    rows = run_bench(micro, ref, cfg.variant, cfg.ns, p, scfg,
                     thread_counts=tuple(_int_list(args.threads_list)),
                     green_opts=cfg.green_opts(), repeats=args.repeats)
    bench_csv(os.path.join(out, "bench.csv"), rows)
    write_config(os.path.join(out, "resolved.cfg"), cfg)
    plot_bench(rows, os.path.join(out, "bench.png"))
    for row in rows:
        eff = "--" if row.efficiency is None else "%.3f" % row.efficiency
        print("N=%d P=%d: %.3fs over %d iterations, E=%s"
              % (row.n, row.threads, row.wall_time, row.iterations, eff))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, PackingError, ContrastError, DivergenceError,
            SeriesConvergenceError, SpectralSymmetryError, FloatingPointError,
            np.linalg.LinAlgError, ValueError, OSError) as exc:
        print("voxhom: error: %s" % exc, file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
