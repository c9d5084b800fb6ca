"""Configuration-driven command line entry point.

Every command takes one INI config file (see :mod:`nsfde.config`), writes
CSV artifacts plus a ``manifest.json`` (config echo, library version, seed)
into the output directory, and exits with 0 on success, 1 when a verdict
fails (order violations found, a check failed, the iteration did not
converge, a shift trend broke), and 2 on configuration errors.  The
``NSFDE_OUTPUT_DIR`` environment variable overrides the output directory
and nothing else.

Commands
--------
simulate     one frozen-flow solve, the measure flow held at the initial law
             (exact when the coefficients ignore the measure; otherwise this
             is the first Picard sweep)
picard       the full Picard-in-distribution iteration with diagnostics
compare      coupled simulation of both systems, order verdict, crossing
             precedence check, violation localization
check        sampling checkers for every coefficient assumption
wasserstein  exact W2 distance between two ensemble CSV files
falsify      fuzz coefficient configurations, report violating ones
shift        drift-shift stability experiment over a list of offsets
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import (
    SegmentSampler,
    check_comparison_conditions,
    check_diffusion_lipschitz_uniform,
    check_diffusion_structure,
    check_drift_lipschitz,
    check_growth_at_zero,
    check_neutral_contraction,
    check_neutral_contraction_uniform,
    check_neutral_monotone,
    mean_field_linear_family,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    build_coefficient_sets,
    build_initial_ensembles,
    parse_config,
)
from .measures import Ensemble, ensemble_from_csv, second_moment, w2
from .order_monitor import (
    check_crossing_precedence,
    crossing_times,
    drift_shift_experiment,
    localize_violation,
    order_report,
)
from .solver import (
    MeasureFlow,
    NoisePlan,
    SimGrid,
    _philox_uniforms,
    coupled_simulate,
    picard,
    solve_frozen,
)

COMMANDS = ("simulate", "picard", "compare", "check", "wasserstein", "falsify", "shift")


def _fmt(precision: int):
    pattern = f"%.{precision}g"

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return pattern % v
        return str(v)

    return fmt


def _write_csv(path: Path, header, rows, precision: int) -> None:
    fmt = _fmt(precision)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, results: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": cfg.grid.seed if cfg.grid else None,
        "config": cfg.raw,
        "results": results,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _grid_of(cfg: ExperimentConfig) -> SimGrid:
    g = cfg.grid
    return SimGrid(dt=g.dt, steps=g.steps, K=g.K, contraction_window=g.contraction_window)


def _write_paths(out_dir: Path, paths, precision: int) -> None:
    times = paths.grid.full_times()
    rows = (
        [k, t] + list(paths.values[k, j])
        for k in range(paths.N)
        for j, t in enumerate(times)
    )
    header = ["particle", "t"] + [f"x_{i + 1}" for i in range(paths.n)]
    _write_csv(out_dir / "paths.csv", header, rows, precision)


def _write_flow_summary(out_dir: Path, paths, precision: int) -> None:
    flow = MeasureFlow.from_pathset(paths)
    rows = []
    for a, ens in enumerate(flow.ensembles):
        rows.append([a * paths.grid.dt] + list(ens.terminal_mean()) + [second_moment(ens)])
    header = ["t"] + [f"mean_{i + 1}" for i in range(paths.n)] + ["second_moment"]
    _write_csv(out_dir / "flow_summary.csv", header, rows, precision)


def _noise(cfg: ExperimentConfig, m: int) -> NoisePlan:
    g = cfg.grid
    return NoisePlan.generate(g.seed, g.N, g.steps, m, g.dt)


def _cmd_simulate(cfg: ExperimentConfig, out_dir: Path) -> int:
    cs, _ = build_coefficient_sets(cfg)
    initial, _ = build_initial_ensembles(cfg, cs.n)
    grid = _grid_of(cfg)
    flow = MeasureFlow.constant(initial, grid.steps)
    paths = solve_frozen(initial, flow, cs, _noise(cfg, cs.m), grid)
    precision = cfg.output.precision
    _write_paths(out_dir, paths, precision)
    _write_flow_summary(out_dir, paths, precision)
    _write_manifest(out_dir, "simulate", cfg, {"n_particles": paths.N})
    return 0


def _cmd_picard(cfg: ExperimentConfig, out_dir: Path) -> int:
    cs, _ = build_coefficient_sets(cfg)
    initial, _ = build_initial_ensembles(cfg, cs.n)
    grid = _grid_of(cfg)
    paths, _, diag = picard(
        initial, cs, grid, _noise(cfg, cs.m),
        tol=cfg.run.tol, max_iter=cfg.run.max_iter, ratio_threshold=cfg.run.ratio_threshold,
    )
    precision = cfg.output.precision
    _write_paths(out_dir, paths, precision)
    _write_flow_summary(out_dir, paths, precision)
    rows = []
    for j, (idx, gap) in enumerate(zip(diag.gap_index, diag.gaps)):
        ratio = diag.ratios[j - 1] if j >= 1 else ""
        rows.append([int(idx), gap, ratio])
    _write_csv(out_dir / "diagnostics.csv", ["n", "gap", "ratio"], rows, precision)
    _write_manifest(out_dir, "picard", cfg, {
        "converged": diag.converged,
        "sweeps": diag.sweeps,
        "contraction_window": diag.window,
    })
    return 0 if diag.converged else 1


def _cmd_compare(cfg: ExperimentConfig, out_dir: Path) -> int:
    cs, cs_bar = build_coefficient_sets(cfg)
    if cs_bar is None or cfg.initial_bar is None:
        raise ConfigError("compare requires [coefficients_bar] and [initial_bar]")
    left, right = build_initial_ensembles(cfg, cs.n)
    grid = _grid_of(cfg)
    pp = coupled_simulate(
        left, right, cs, cs_bar, grid, _noise(cfg, cs.m),
        tol=cfg.run.tol, max_iter=cfg.run.max_iter,
    )
    verdict = order_report(pp, cs.neutral, cfg.run.slack)
    report = crossing_times(pp, cs.neutral, cfg.run.slack)
    precedence_ok, precedence_violators = check_crossing_precedence(report)
    diagnoses = []
    if np.isfinite(report.compensated_pair_times).any():
        diagnoses = localize_violation(pp, cs, cs_bar, report, tol=cfg.run.localize_tol)
    precision = cfg.output.precision
    _write_csv(
        out_dir / "verdict.csv",
        ["applicable", "n_pairs", "n_violating", "violation_fraction",
         "max_violation", "precedence_ok"],
        [[verdict.applicable, verdict.n_pairs, verdict.n_violating,
          verdict.violation_fraction, verdict.max_violation, precedence_ok]],
        precision,
    )
    finite = verdict.first_violation_times[np.isfinite(verdict.first_violation_times)]
    hist_rows = []
    for a in range(grid.steps + 1):
        t = a * grid.dt
        count = int(np.sum(np.abs(finite - t) < grid.dt / 2))
        hist_rows.append([t, count])
    _write_csv(out_dir / "crossings.csv", ["t", "first_violations"], hist_rows, precision)
    _write_csv(
        out_dir / "diagnosis.csv",
        ["pair", "component", "t", "condition", "magnitude"],
        [[d.pair, d.component, d.time, d.condition, d.magnitude] for d in diagnoses],
        precision,
    )
    _write_manifest(out_dir, "compare", cfg, {
        "applicable": verdict.applicable,
        "violation_fraction": verdict.violation_fraction,
        "precedence_ok": bool(precedence_ok),
        "n_precedence_violations": int(precedence_violators.size),
        "n_diagnoses": len(diagnoses),
    })
    ok = verdict.applicable and verdict.n_violating == 0 and precedence_ok
    return 0 if ok else 1


def _checker_suite(cfg: ExperimentConfig):
    cs, cs_bar = build_coefficient_sets(cfg)
    g = cfg.grid
    sampler = SegmentSampler(K=g.K, r0=g.r0, n=cs.n, seed=g.seed)
    trials = cfg.run.trials
    lip = cs.declared["lip"] if cs_bar is None else max(cs.declared["lip"], cs_bar.declared["lip"])
    lip_uniform = cs.declared["lip_uniform"] if cs_bar is None else max(
        cs.declared["lip_uniform"], cs_bar.declared["lip_uniform"])
    results = [
        ("base", check_neutral_monotone(cs.neutral, sampler, trials)),
        ("base", check_neutral_contraction(cs.neutral, sampler, trials)),
        ("base", check_neutral_contraction_uniform(cs.neutral, sampler, trials)),
        ("pair", check_drift_lipschitz(
            cs.drift, (cs_bar or cs).drift, lip, sampler, trials)),
        ("base", check_diffusion_structure(
            cs.diffusion, cs.neutral, cs.declared["lip"], sampler, trials)),
        ("pair", check_diffusion_lipschitz_uniform(
            cs.diffusion, (cs_bar or cs).diffusion, lip_uniform, sampler, trials)),
        ("base", check_growth_at_zero(
            cs.drift, cs.diffusion, sampler, trials, bound=cs.declared["growth"])),
    ]
    if cs_bar is not None:
        results.append(("bar", check_diffusion_structure(
            cs_bar.diffusion, cs.neutral, cs_bar.declared["lip"], sampler, trials)))
        results.append(("bar", check_growth_at_zero(
            cs_bar.drift, cs_bar.diffusion, sampler, trials, bound=cs_bar.declared["growth"])))
        results.append(("pair", check_comparison_conditions(cs, cs_bar, sampler, trials)))
    return results


def _cmd_check(cfg: ExperimentConfig, out_dir: Path) -> int:
    results = _checker_suite(cfg)
    rows = [
        [rep.name, system, rep.passed, rep.trials,
         "" if rep.metric is None else rep.metric,
         "" if rep.threshold is None else rep.threshold,
         rep.violations]
        for system, rep in results
    ]
    _write_csv(
        out_dir / "check_report.csv",
        ["check", "system", "passed", "trials", "metric", "threshold", "violations"],
        rows, cfg.output.precision,
    )
    all_pass = all(rep.passed for _, rep in results)
    _write_manifest(out_dir, "check", cfg, {
        "all_pass": all_pass,
        "failed": [rep.name for _, rep in results if not rep.passed],
    })
    for system, rep in results:
        print(f"[{system}] {rep}")
    return 0 if all_pass else 1


def _cmd_wasserstein(cfg: ExperimentConfig, out_dir: Path) -> int:
    if cfg.run.left_file is None or cfg.run.right_file is None:
        raise ConfigError("wasserstein requires run.left_file and run.right_file")
    mu = ensemble_from_csv(cfg.run.left_file)
    nu = ensemble_from_csv(cfg.run.right_file)
    distance = w2(mu, nu)
    _write_csv(
        out_dir / "wasserstein.csv",
        ["left", "right", "w2"],
        [[cfg.run.left_file, cfg.run.right_file, distance]],
        cfg.output.precision,
    )
    _write_manifest(out_dir, "wasserstein", cfg, {"w2": distance})
    print(f"w2 = {distance:.12g}")
    return 0


def _cmd_falsify(cfg: ExperimentConfig, out_dir: Path) -> int:
    cs_base, _ = build_coefficient_sets(cfg)
    if cfg.initial is None:
        raise ConfigError("falsify requires [initial]")
    g = cfg.grid
    n, m = cs_base.n, cs_base.m
    rng = np.random.Generator(np.random.Philox(key=(g.seed % (1 << 64)) * (1 << 64) + (1 << 49)))
    grid = _grid_of(cfg)
    noise = _noise(cfg, m)
    rows = []
    diag_rows = []
    for trial in range(cfg.run.trials):
        kappa = rng.uniform(0.2, 0.7)
        A = np.abs(rng.uniform(0.1, 1.0, (n, n)))
        A *= kappa / A.sum(axis=1).max()
        B = rng.uniform(0.0, 0.4, (n, n))
        C = rng.uniform(-0.3, 0.4, (n, n))
        s = rng.uniform(0.1, 0.7, (n, m))
        c = rng.uniform(-0.3, 0.3, (n, m))
        lagged = bool(rng.random() < 0.35)
        shift = rng.uniform(0.0, 0.3, n)
        cs = mean_field_linear_family(A=A, B=B, C=C, s=s, c=c, K=g.K, r0=g.r0,
                                      lagged_sigma=lagged)
        cs_bar = cs.with_drift_shift(shift)
        sampler = SegmentSampler(K=g.K, r0=g.r0, n=n, seed=g.seed + 1000 + trial)
        checker = check_comparison_conditions(cs, cs_bar, sampler, max(cfg.run.trials // 4, 50))
        pair_shift = 0.05 + 0.2 * _philox_uniforms(g.seed, (1 << 48) + 3 + trial, g.N)
        left, _ = build_initial_ensembles(cfg, n)
        right = Ensemble(left.values + pair_shift[:, None, None], left.r0)
        pp = coupled_simulate(left, right, cs, cs_bar, grid, noise,
                              tol=cfg.run.tol, max_iter=cfg.run.max_iter)
        verdict = order_report(pp, cs.neutral, cfg.run.slack)
        report = crossing_times(pp, cs.neutral, cfg.run.slack)
        diagnoses = localize_violation(pp, cs, cs_bar, report, tol=cfg.run.localize_tol)
        flagged = sorted({d.condition for d in diagnoses})
        rows.append([trial, checker.passed, lagged, verdict.violation_fraction,
                     "|".join(flagged)])
        for d in diagnoses:
            diag_rows.append([trial, d.pair, d.component, d.time, d.condition, d.magnitude])
    precision = cfg.output.precision
    _write_csv(out_dir / "falsify.csv",
               ["trial", "checker_passed", "lagged_sigma", "violation_fraction", "flagged"],
               rows, precision)
    _write_csv(out_dir / "diagnosis.csv",
               ["trial", "pair", "component", "t", "condition", "magnitude"],
               diag_rows, precision)
    n_violating = sum(1 for r in rows if r[3] > 0)
    _write_manifest(out_dir, "falsify", cfg, {
        "trials": cfg.run.trials,
        "violating_configs": n_violating,
    })
    print(f"falsify: {n_violating}/{cfg.run.trials} configurations violated the order")
    return 0


def _cmd_shift(cfg: ExperimentConfig, out_dir: Path) -> int:
    cs, _ = build_coefficient_sets(cfg)
    initial, _ = build_initial_ensembles(cfg, cs.n)
    if cfg.run.eps_list is None:
        raise ConfigError("shift requires run.eps_list")
    result = drift_shift_experiment(
        cs, cfg.run.eps_list, initial, _grid_of(cfg), _noise(cfg, cs.m),
        tol=cfg.run.tol, max_iter=cfg.run.max_iter,
    )
    _write_csv(out_dir / "shift.csv", ["eps", "distance"],
               list(zip(result.shifts, result.distances)), cfg.output.precision)
    _write_manifest(out_dir, "shift", cfg, {
        "strictly_decreasing": result.strictly_decreasing,
    })
    return 0 if result.strictly_decreasing else 1


_DISPATCH = {
    "simulate": _cmd_simulate,
    "picard": _cmd_picard,
    "compare": _cmd_compare,
    "check": _cmd_check,
    "wasserstein": _cmd_wasserstein,
    "falsify": _cmd_falsify,
    "shift": _cmd_shift,
}


def run(command: str, cfg: ExperimentConfig) -> int:
    """Execute one command against a parsed config; returns the exit code."""
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}")
    directory = os.environ.get("NSFDE_OUTPUT_DIR", cfg.output.directory)
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    return _DISPATCH[command](cfg, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nsfde",
        description="Distribution-dependent neutral SFDE simulation and order diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} experiment")
        p.add_argument("config", help="path to the INI experiment config")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
