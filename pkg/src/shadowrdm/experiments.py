"""Configured batch runs: measurement-count sweeps, condition comparisons,
noise sweeps, and potential-energy scans, emitted as machine-readable CSV.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import tomli

from .fci import TwoRDM, compute_2rdm, solve_system
from .hamiltonians import ReducedHamiltonian, reduced_hamiltonian, system_from_key
from .numerics import RngStream
from .rdm_sdp import (ConditionSet, SDPBuildError, SolverOptions, SolverStatus,
                      frobenius_error, sv2rdm)
from .shadows import ShadowRecord, SpinRotationMode, add_gaussian_noise, sample_shadow_ensemble

__all__ = [
    "ScenarioConfig",
    "ResultRow",
    "run_scenario",
    "pes_scan",
    "emit_csv",
    "load_config",
    "CSV_HEADER",
]

CSV_HEADER = ("system,conditions,m,seed,sigma,energy,e_fci,energy_error,"
              "rdm_error,status,iterations,wall_time")

_NOISE_SALT = 0x6E6F6973  # distinct stream for the Gaussian noise draws


@dataclass
class ScenarioConfig:
    system: str
    conditions: ConditionSet = field(default_factory=ConditionSet)
    shadow_counts: list[int] = field(default_factory=lambda: [0])
    seeds: list[int] = field(default_factory=lambda: [0])
    sigma: float = 0.0
    spin_mode: SpinRotationMode = SpinRotationMode.SPATIAL_REPLICATED
    ensemble_mode: str = "prefix"  # "prefix": m grows by accumulation; "fresh": per-m rotations
    solver: SolverOptions = field(default_factory=SolverOptions)
    output: str | None = None
    sdp_debug_dir: str | None = None  # one solver dump JSON per row when set

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ValueError("need at least one seed")
        if sorted(self.shadow_counts) != list(self.shadow_counts):
            raise ValueError("shadow_counts must be sorted ascending")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.ensemble_mode not in ("prefix", "fresh"):
            raise ValueError("ensemble_mode must be 'prefix' or 'fresh'")


@dataclass
class ResultRow:
    system: str
    conditions: str
    m: int
    seed: int
    sigma: float
    energy: float
    e_fci: float
    energy_error: float
    rdm_error: float
    status: str
    iterations: int
    wall_time: float


def _noisy(records: list[ShadowRecord], sigma: float, seed: int) -> list[ShadowRecord]:
    if sigma == 0.0:
        return records
    gen = RngStream(seed).derived(_NOISE_SALT).generator()
    return [add_gaussian_noise(rec, sigma, gen) for rec in records]


def _ensemble_for(d2: TwoRDM, cfg: ScenarioConfig, seed: int, m: int,
                  prefix_pool: list[ShadowRecord]) -> list[ShadowRecord]:
    if cfg.ensemble_mode == "prefix":
        return prefix_pool[:m]
    fresh = sample_shadow_ensemble(d2, m, cfg.spin_mode, RngStream(seed).derived(m))
    return _noisy(fresh, cfg.sigma, seed ^ m)


def _solve_row(red: ReducedHamiltonian, cfg: ScenarioConfig, system: str,
               m: int, seed: int, e_fci: float, d2_fci: TwoRDM,
               shadows: list[ShadowRecord]) -> ResultRow:
    opts = cfg.solver
    if cfg.sdp_debug_dir:
        import dataclasses
        import os
        import re
        tag = re.sub(r"[^A-Za-z0-9.]+", "_", system)
        path = os.path.join(cfg.sdp_debug_dir, f"{tag}_m{m}_seed{seed}.json")
        opts = dataclasses.replace(opts, debug_json=path)
    t0 = time.perf_counter()
    try:
        res = sv2rdm(red, cfg.conditions, shadows, opts)
        energy = res.energy
        rdm_err = frobenius_error(res.d2, d2_fci)
        status = res.solution.status.value
        iters = res.solution.iterations
    except SDPBuildError:
        energy = rdm_err = math.nan
        status = SolverStatus.INFEASIBLE.value
        iters = 0
    wall = time.perf_counter() - t0
    return ResultRow(system, cfg.conditions.label, m, seed, cfg.sigma,
                     energy, e_fci, energy - e_fci, rdm_err, status, iters, wall)


def run_scenario(cfg: ScenarioConfig) -> list[ResultRow]:
    """One row per (seed, shadow count): solve the system exactly once, then
    reconstruct from measurements of its exact 2-RDM."""
    ints, n_elec = system_from_key(cfg.system)
    sol = solve_system(ints, n_elec)
    e_fci = sol.energy + ints.e_nuc
    d2_fci = compute_2rdm(sol)
    red = reduced_hamiltonian(ints, n_elec)

    rows = []
    m_max = max(cfg.shadow_counts) if cfg.shadow_counts else 0
    for seed in cfg.seeds:
        pool = sample_shadow_ensemble(d2_fci, m_max, cfg.spin_mode, RngStream(seed))
        pool = _noisy(pool, cfg.sigma, seed)
        for m in cfg.shadow_counts:
            shadows = _ensemble_for(d2_fci, cfg, seed, m, pool)
            rows.append(_solve_row(red, cfg, cfg.system, m, seed, e_fci, d2_fci, shadows))
    return rows


def pes_scan(system_family: str, geometries: list[float],
             cfg: ScenarioConfig) -> list[ResultRow]:
    """Per geometry: one exact-diagonalization row, one variational row
    (m = 0), and one constrained row per seed at the largest configured
    shadow count.

    ``system_family`` is a hydrogen-chain prefix like ``h2`` or an
    ``fcidump:...{}...`` path template with a geometry placeholder.
    """
    m_run = max(cfg.shadow_counts) if cfg.shadow_counts else 0
    rows: list[ResultRow] = []
    for geom in geometries:
        if system_family.startswith("fcidump:"):
            if "{}" not in system_family:
                raise ValueError("fcidump family needs a {} placeholder per geometry")
            key = system_family.format(geom)
        else:
            key = f"{system_family}@{geom:g}"
        ints, n_elec = system_from_key(key)
        sol = solve_system(ints, n_elec)
        e_fci = sol.energy + ints.e_nuc
        d2_fci = compute_2rdm(sol)
        red = reduced_hamiltonian(ints, n_elec)

        rows.append(ResultRow(key, "FCI", 0, cfg.seeds[0], cfg.sigma, e_fci, e_fci,
                              0.0, 0.0, SolverStatus.CONVERGED.value, 0, 0.0))
        rows.append(_solve_row(red, cfg, key, 0, cfg.seeds[0], e_fci, d2_fci, []))
        if m_run > 0:
            for seed in cfg.seeds:
                pool = sample_shadow_ensemble(d2_fci, m_run, cfg.spin_mode, RngStream(seed))
                pool = _noisy(pool, cfg.sigma, seed)
                rows.append(_solve_row(red, cfg, key, m_run, seed, e_fci, d2_fci, pool))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def emit_csv(rows: list[ResultRow], path: str) -> None:
    """RFC-4180 CSV with a fixed header; floats carry 12 significant digits."""
    if not rows:
        raise ValueError("no rows to emit")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(CSV_HEADER.split(","))
        for r in rows:
            writer.writerow([
                r.system, r.conditions, r.m, r.seed, _fmt(r.sigma),
                _fmt(r.energy), _fmt(r.e_fci), _fmt(r.energy_error),
                _fmt(r.rdm_error), r.status, r.iterations, _fmt(r.wall_time),
            ])


def load_config(path: str) -> ScenarioConfig:
    """Scenario from a TOML file: a [scenario] table plus an optional
    [solver] table."""
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    sc = doc.get("scenario", {})
    sv = doc.get("solver", {})
    solver = SolverOptions(
        tol_primal=float(sv.get("tol_primal", 1e-6)),
        tol_dual=float(sv.get("tol_dual", 1e-6)),
        max_iter=int(sv.get("max_iter", 20000)),
        penalty_init=(float(sv["penalty_init"]) if "penalty_init" in sv else None),
    )
    if "system" not in sc:
        raise ValueError(f"{path}: [scenario] must define 'system'")
    return ScenarioConfig(
        system=str(sc["system"]),
        conditions=ConditionSet.parse(str(sc.get("conditions", "dqg"))),
        shadow_counts=[int(x) for x in sc.get("shadow_counts", [0])],
        seeds=[int(x) for x in sc.get("seeds", [0])],
        sigma=float(sc.get("sigma", 0.0)),
        spin_mode=SpinRotationMode(str(sc.get("spin_mode", "spatial"))),
        ensemble_mode=str(sc.get("ensemble_mode", "prefix")),
        solver=solver,
        output=sc.get("output"),
    )
