"""Command-line entry points.

Subcommands: ``run`` (TOML scenario), ``pes`` (potential-energy scan),
``fci`` (exact energy of a registry system), ``shadows`` (dump a measurement
ensemble as JSON).  Exit code 0 when every solve converged or hit its
iteration budget; 2 when any row is infeasible.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import (ScenarioConfig, emit_csv, load_config, pes_scan,
                          run_scenario)
from .fci import compute_2rdm, solve_system
from .hamiltonians import system_from_key
from .numerics import RngStream
from .rdm_sdp import ConditionSet, SolverOptions, SolverStatus
from .shadows import SpinRotationMode, add_gaussian_noise, ensemble_to_json, sample_shadow_ensemble


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=None,
                   help="primal and dual residual tolerance")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--conditions", choices=["d", "dq", "dqg"], default=None)
    p.add_argument("--spin-mode", choices=["spatial", "spinorb"], default=None)


def _apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    solver = cfg.solver
    if args.tol is not None:
        solver = dataclasses.replace(solver, tol_primal=args.tol, tol_dual=args.tol)
    if args.max_iter is not None:
        solver = dataclasses.replace(solver, max_iter=args.max_iter)
    cfg = dataclasses.replace(cfg, solver=solver)
    if args.conditions is not None:
        cfg = dataclasses.replace(cfg, conditions=ConditionSet.parse(args.conditions))
    if args.spin_mode is not None:
        cfg = dataclasses.replace(cfg, spin_mode=SpinRotationMode(args.spin_mode))
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, output=args.out)
    return cfg


def _finish(rows, out: str | None) -> int:
    if out:
        emit_csv(rows, out)
        print(f"wrote {len(rows)} rows to {out}")
    else:
        for r in rows:
            print(f"{r.system} {r.conditions} m={r.m} seed={r.seed} "
                  f"E={r.energy:.10f} dE={r.energy_error:+.3e} "
                  f"rdm={r.rdm_error:.3e} {r.status} it={r.iterations}")
    bad = any(r.status == SolverStatus.INFEASIBLE.value for r in rows)
    return 2 if bad else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="shadowrdm", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run a TOML scenario")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="CSV output path (overrides config)")
    _add_solver_flags(p_run)

    p_pes = sub.add_parser("pes", help="potential-energy scan")
    p_pes.add_argument("family", help="system family, e.g. h2, or fcidump:...{}...")
    p_pes.add_argument("--geometries", required=True,
                       help="comma-separated spacings in Angstrom")
    p_pes.add_argument("--m", type=int, default=12, help="shadow count for the constrained run")
    p_pes.add_argument("--seeds", default="0", help="comma-separated seeds")
    p_pes.add_argument("--sigma", type=float, default=0.0)
    p_pes.add_argument("--out", default=None)
    _add_solver_flags(p_pes)

    p_fci = sub.add_parser("fci", help="exact ground-state energy of a system")
    p_fci.add_argument("system")

    p_sh = sub.add_parser("shadows", help="dump a measurement ensemble as JSON")
    p_sh.add_argument("system")
    p_sh.add_argument("--m", type=int, required=True)
    p_sh.add_argument("--seed", type=int, default=0)
    p_sh.add_argument("--sigma", type=float, default=0.0)
    p_sh.add_argument("--spin-mode", choices=["spatial", "spinorb"], default="spatial")
    p_sh.add_argument("--out", required=True)

    args = parser.parse_args(argv)

    if args.cmd == "run":
        cfg = _apply_overrides(load_config(args.config), args)
        rows = run_scenario(cfg)
        return _finish(rows, cfg.output)

    if args.cmd == "pes":
        cfg = ScenarioConfig(
            system="h2@1.0",  # placeholder; pes_scan builds per-geometry keys
            shadow_counts=[args.m],
            seeds=[int(s) for s in args.seeds.split(",")],
            sigma=args.sigma,
        )
        cfg = _apply_overrides(cfg, args)
        geoms = [float(g) for g in args.geometries.split(",")]
        rows = pes_scan(args.family, geoms, cfg)
        return _finish(rows, args.out)

    if args.cmd == "fci":
        ints, n_elec = system_from_key(args.system)
        sol = solve_system(ints, n_elec)
        print(f"system      : {args.system}")
        print(f"determinants: {sol.basis.size}")
        print(f"E_elec      : {sol.energy:.12f}")
        print(f"e_nuc       : {ints.e_nuc:.12f}")
        print(f"E_total     : {sol.energy + ints.e_nuc:.12f}")
        return 0

    if args.cmd == "shadows":
        ints, n_elec = system_from_key(args.system)
        d2 = compute_2rdm(solve_system(ints, n_elec))
        mode = SpinRotationMode(args.spin_mode)
        records = sample_shadow_ensemble(d2, args.m, mode, RngStream(args.seed))
        if args.sigma > 0:
            gen = RngStream(args.seed).derived(0x6E6F6973).generator()
            records = [add_gaussian_noise(r, args.sigma, gen) for r in records]
        with open(args.out, "w") as fh:
            fh.write(ensemble_to_json(records, args.seed, mode, args.sigma))
        print(f"wrote {len(records)} shadows to {args.out}")
        return 0

    return 0


if __name__ == "__main__":
    sys.exit(main())
