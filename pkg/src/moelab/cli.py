"""Command-line driver: one subcommand per experiment.

Each run writes a CSV summary and a JSON record to the output directory and
exits with 0 on success, 2 on config errors, 3 on numerical failure, and 4
when a conjecture-violation finding is confirmed (so pipelines can alarm).
The master seed falls back to the MOE_LAB_SEED environment variable when no
flag or config value is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import NoiseParams, additive_noise_channel, gaussian_displacement_grid, lindblad_apply
from .config import EXPERIMENTS, ExperimentConfig
from .errors import MoelabError
from .fock import (
    DensityMatrix,
    FockSpace,
    ThermalSpec,
    energy,
    entropy_rate,
    random_density_matrix,
    thermal_state,
    trace_distance,
    vacuum_state,
    von_neumann_entropy,
)
from .optimizer import counterexample_search, thermal_benchmark
from .variational import (
    boundary_entropy_scaling,
    energy_stationarity_residual,
    entropy_stationarity_residual,
    minimality_perturbation_check,
    stationarity_scaling,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FINDING = 4

CSV_SCHEMAS = {
    "channel-check": ["quantity", "value", "tolerance_note"],
    "stationarity": ["beta", "dt", "residual", "u", "c", "fitted_exponent"],
    "energy-lagrangian": ["label", "beta_or_seed", "residual", "branch"],
    "minimality": [
        "beta",
        "trials",
        "violations",
        "min_change",
        "displacement_entropy_change",
        "displacement_energy_change",
    ],
    "boundary": ["dt", "entropy_jump_ratio"],
    "benchmark": ["s0", "beta", "s_out"],
    "search": ["s0", "seed_index", "s_out", "benchmark", "gap", "converged"],
}


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _schema_help() -> str:
    lines = ["CSV column schemas (one file per experiment):"]
    for name, cols in CSV_SCHEMAS.items():
        lines.append(f"  {name}: {', '.join(cols)}")
    lines.append("")
    lines.append("Exit codes: 0 success, 2 config error, 3 numerical failure, "
                 "4 conjecture-violation finding.")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moelab",
        description="Experiments on the additive bosonic noise channel: "
        "generator checks, stationarity residuals, minimality probes, "
        "boundary scaling, thermal benchmarks, and counterexample search.",
        epilog=_schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"moelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file (flags override file values)")
        sp.add_argument("--d", type=int, help="Fock-space dimension")
        sp.add_argument("--gamma", type=float, help="photon add/subtract rate")
        sp.add_argument("--dt", type=float, help="time step")
        sp.add_argument("--dt-list", help="comma-separated decreasing time steps")
        sp.add_argument("--delta-e", type=float, help="channel mean added energy")
        sp.add_argument("--s0", type=float, help="input entropy level")
        sp.add_argument("--s0-list", help="comma-separated input entropy levels")
        sp.add_argument("--beta", type=float, help="inverse temperature")
        sp.add_argument("--beta-list", help="comma-separated inverse temperatures")
        sp.add_argument("--seeds", type=int, help="number of restart seeds")
        sp.add_argument("--seed-offset", type=int, help="first seed index of the sweep")
        sp.add_argument("--master-seed", type=int, help="master seed (fallback: MOE_LAB_SEED)")
        sp.add_argument("--trials", type=int, help="perturbation trials")
        sp.add_argument("--t-step", type=float, help="perturbation step")
        sp.add_argument("--nodes-per-axis", type=int, help="quadrature nodes per axis")
        sp.add_argument("--steps", type=int, help="integrator substeps")
        sp.add_argument("--max-iters", type=int, help="optimizer iteration cap")
        sp.add_argument("--grad-tol", type=float, help="optimizer gradient tolerance")
        sp.add_argument("--violation-margin", type=float, help="search violation margin")
        sp.add_argument("--threads", type=int, help="worker pool size for search restarts")
        sp.add_argument("--output-dir", help="directory for CSV/JSON records")
        sp.add_argument(
            "--override-first-order",
            action="store_true",
            default=None,
            help="allow gamma*dt > 0.1",
        )

    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        add_common(sp)

    val = sub.add_parser("validate", help="validate a config file and exit")
    val.add_argument("config_path", help="JSON config file to validate")
    return parser


_FLAG_FIELDS = {
    "d": "d",
    "gamma": "gamma",
    "dt": "dt",
    "delta_e": "delta_e",
    "s0": "s0",
    "beta": "beta",
    "seeds": "seeds",
    "seed_offset": "seed_offset",
    "master_seed": "master_seed",
    "trials": "trials",
    "t_step": "t_step",
    "nodes_per_axis": "nodes_per_axis",
    "steps": "steps",
    "max_iters": "max_iters",
    "grad_tol": "grad_tol",
    "violation_margin": "violation_margin",
    "threads": "threads",
    "output_dir": "output_dir",
    "override_first_order": "override_first_order",
}


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    cfg.experiment = args.command
    for flag, fieldname in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, fieldname, value)
    if getattr(args, "dt_list", None):
        cfg.dt_list = _parse_float_list(args.dt_list)
    if getattr(args, "s0_list", None):
        cfg.s0_list = _parse_float_list(args.s0_list)
    if getattr(args, "beta_list", None):
        cfg.beta_list = _parse_float_list(args.beta_list)
    if getattr(args, "master_seed", None) is None and "MOE_LAB_SEED" in os.environ:
        if getattr(args, "config", None) is None or "master_seed" not in _file_keys(args):
            cfg.master_seed = int(os.environ["MOE_LAB_SEED"])
    return cfg


def _file_keys(args: argparse.Namespace) -> set:
    try:
        with open(args.config) as fh:
            return set(json.load(fh))
    except Exception:
        return set()


# ---------------------------------------------------------------------------
# experiment runners: each returns (csv_rows, payload, exit_code)


def _run_channel_check(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    p = NoiseParams(cfg.gamma, cfg.dt, allow_large_step=cfg.override_first_order)
    rows = []
    rng_states = [
        random_density_matrix((cfg.master_seed, k), space, rank=space.dim) for k in range(10)
    ]
    trace_defect = max(abs(np.trace(lindblad_apply(r)).real) for r in rng_states)
    rows.append(["generator_trace_defect", trace_defect, "<= 1e-13"])

    vac = vacuum_state(space)
    grid = gaussian_displacement_grid(cfg.delta_e, cfg.nodes_per_axis)
    out = additive_noise_channel(vac, cfg.delta_e, grid)
    beta_ref = math.log(1.0 + 1.0 / cfg.delta_e) if cfg.delta_e > 0 else math.inf
    ref = thermal_state(ThermalSpec(beta_ref, space))
    rows.append(["vacuum_to_thermal_distance", trace_distance(out, ref), "<= 1e-8"])

    third = cfg.delta_e / 3.0
    grid_a = gaussian_displacement_grid(third, cfg.nodes_per_axis)
    grid_b = gaussian_displacement_grid(2.0 * third, cfg.nodes_per_axis)
    composed = additive_noise_channel(additive_noise_channel(vac, third, grid_a), 2.0 * third, grid_b)
    rows.append(["semigroup_defect", trace_distance(composed, out), "<= 1e-7"])

    rho_t = thermal_state(ThermalSpec(cfg.beta, space))
    rate = entropy_rate(rho_t, cfg.gamma)
    rows.append(["thermal_entropy_rate_minus_gamma_beta", rate - cfg.gamma * cfg.beta, "<= 1e-8"])
    payload = {"rows": [{"quantity": r[0], "value": r[1]} for r in rows]}
    return rows, payload, EXIT_OK


def _run_stationarity(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    dts = cfg.dt_levels()
    rows = []
    payload = {"betas": []}
    for beta in cfg.beta_levels():
        rho = thermal_state(ThermalSpec(beta, space))
        fits = []
        for dt in dts:
            fit = entropy_stationarity_residual(rho, NoiseParams(cfg.gamma, dt))
            fits.append(fit)
        if len(dts) >= 3:
            report = stationarity_scaling(beta, space, cfg.gamma, dts)
            exponent = report.fitted_exponent
        else:
            exponent = float("nan")
        for dt, fit in zip(dts, fits):
            rows.append(
                [beta, dt, fit.residual_norm, fit.multipliers["u"], fit.multipliers["c"], exponent]
            )
        payload["betas"].append(
            {
                "beta": beta,
                "dt": dts,
                "residuals": [f.residual_norm for f in fits],
                "fitted_exponent": exponent,
            }
        )
    return rows, payload, EXIT_OK


def _run_energy_lagrangian(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    rows = []
    records = []
    for beta in cfg.beta_levels():
        fit = energy_stationarity_residual(thermal_state(ThermalSpec(beta, space)))
        rows.append(["thermal", beta, fit.residual_norm, fit.branch])
        records.append({"label": "thermal", "beta": beta, "residual": fit.residual_norm})
    for k in range(cfg.seeds):
        rho = random_density_matrix((cfg.master_seed, k), space, rank=space.dim)
        fit = energy_stationarity_residual(rho)
        rows.append(["random", k, fit.residual_norm, fit.branch])
        records.append({"label": "random", "seed_index": k, "residual": fit.residual_norm})
    return rows, {"records": records}, EXIT_OK


def _run_minimality(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    p = NoiseParams(cfg.gamma, cfg.dt, allow_large_step=cfg.override_first_order)
    rows = []
    reports = []
    for beta in cfg.beta_levels():
        rep = minimality_perturbation_check(
            beta, space, p, trials=cfg.trials, t_step=cfg.t_step, seed=cfg.master_seed
        )
        rows.append(
            [
                beta,
                rep.trials,
                len(rep.violations),
                rep.min_change,
                rep.displacement_entropy_change,
                rep.displacement_energy_change,
            ]
        )
        reports.append(
            {
                "beta": beta,
                "trials": rep.trials,
                "violations": [list(v) for v in rep.violations],
                "min_change": rep.min_change,
                "benchmark_slope": rep.benchmark_slope,
                "displacement_entropy_change": rep.displacement_entropy_change,
                "displacement_energy_change": rep.displacement_energy_change,
            }
        )
    code = EXIT_FINDING if any(r["violations"] for r in reports) else EXIT_OK
    return rows, {"reports": reports}, code


def _run_boundary(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    dts = cfg.dt_levels()
    if len(dts) < 3:
        raise ValueError("boundary experiment needs --dt-list with at least 3 values")
    report = boundary_entropy_scaling(cfg.gamma, dts, space, steps=cfg.steps)
    rows = [[dt, ratio] for dt, ratio in zip(report.x_values, report.quantity)]
    payload = {
        "dt": list(report.x_values),
        "entropy_jump_ratios": list(report.quantity),
        "fitted_exponent": report.fitted_exponent,
    }
    return rows, payload, EXIT_OK


def _run_benchmark(cfg: ExperimentConfig):
    space = FockSpace(cfg.d, cfg.tail_tol)
    p = NoiseParams(cfg.gamma, cfg.dt, allow_large_step=cfg.override_first_order)
    rows = []
    records = []
    for s0 in cfg.s0_levels():
        bench = thermal_benchmark(s0, p, space, steps=cfg.steps)
        rows.append([s0, bench.beta, bench.s_out])
        records.append({"s0": s0, "beta": bench.beta, "s_out": bench.s_out})
    return rows, {"records": records}, EXIT_OK


def _run_search(cfg: ExperimentConfig):
    report = counterexample_search(cfg, threads=cfg.threads)
    rows = [
        [r["s0"], r["seed_index"], r["s_out"], r["benchmark"], r["gap"], r["converged"]]
        for r in report.runs
    ]
    payload = {
        "restarts": report.restarts,
        "best_output_entropy": report.best_output_entropy,
        "thermal_output_entropy": report.thermal_output_entropy,
        "violation_margin": report.violation_margin,
        "violations": [dict(v) for v in report.violations],
        "unconfirmed": [dict(v) for v in report.unconfirmed],
        "runs": [dict(r) for r in report.runs],
        "coverage": dict(report.coverage),
    }
    code = EXIT_FINDING if report.violations else EXIT_OK
    return rows, payload, code


_RUNNERS = {
    "channel-check": _run_channel_check,
    "stationarity": _run_stationarity,
    "energy-lagrangian": _run_energy_lagrangian,
    "minimality": _run_minimality,
    "boundary": _run_boundary,
    "benchmark": _run_benchmark,
    "search": _run_search,
}


def _write_outputs(cfg: ExperimentConfig, rows, payload, started: float) -> tuple[str, str]:
    os.makedirs(cfg.output_dir, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    base = os.path.join(cfg.output_dir, f"{cfg.experiment}-{stamp}")
    csv_path = base + ".csv"
    json_path = base + ".json"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_SCHEMAS[cfg.experiment])
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    record = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "results": payload,
        "meta": {
            "version": __version__,
            "master_seed": cfg.master_seed,
            "wall_time_s": time.monotonic() - started,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        },
    }
    with open(json_path, "w") as fh:
        json.dump(record, fh, indent=2, default=float)
    return csv_path, json_path


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            cfg = ExperimentConfig.from_file(args.config_path)
        except (OSError, ValueError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        problems = cfg.validate()
        for msg in problems:
            print(f"invalid: {msg}", file=sys.stderr)
        if not problems:
            print("config ok")
        return EXIT_OK if not problems else EXIT_CONFIG

    try:
        cfg = resolve_config(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    problems = cfg.validate()
    if problems:
        for msg in problems:
            print(f"invalid: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    started = time.monotonic()
    try:
        rows, payload, code = _RUNNERS[cfg.experiment](cfg)
    except MoelabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    csv_path, json_path = _write_outputs(cfg, rows, payload, started)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    if code == EXIT_FINDING:
        print("FINDING: conjecture-violation candidates recorded", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
