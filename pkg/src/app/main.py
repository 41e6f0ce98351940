"""
Command-line interface for D2DRegen
Subcommands: costs, simulate, sweep, thresholds, tradeoff
"""

import argparse
import copy
import dataclasses
import sys
from typing import List, Optional

import numpy as np
import pandas as pd
from loguru import logger

from src.codes import tradeoff_curve, validate_against_population
from src.exceptions import InvalidParameterError, NoCrossingError, NoRequestsError, UnderSampledError
from src.experiments import (
    FORMATS,
    SCHEME_NAMES,
    ExperimentConfig,
    configure_logging,
    load_experiment,
    load_settings,
    write_table,
)
from src.tools.churn_simulator import CATEGORIES, ChurnSimulator, SimConfig, SimPolicy, SimReport, compare_to_analytic
from src.tools.cost_model import COST_TERMS, CostOptions, Mbr, Msr, Replication, scheme_breakdown, scheme_cost
from src.tools.planner import MethodPlanner, fit_log_threshold

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNDER_SAMPLED = 3
EXIT_NO_CROSSING = 4


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser; flags left unset do not override the --config document"""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat YAML experiment config (flags override it)")
    common.add_argument("--settings", default="config.yaml", help="project settings file")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("--out", help="output file (default: standard output)")

    system = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    system.add_argument("--N", type=float, help="expected number of nodes")
    system.add_argument("--lambda", dest="lam", type=float, help="node departure rate")
    system.add_argument("--omega", type=float, help="per-node request rate")
    system.add_argument("--p", type=float, help="popularity omega/lambda")
    system.add_argument("--R", type=float, help="base-station to D2D cost ratio")

    code = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    code.add_argument("--scheme", choices=SCHEME_NAMES)
    code.add_argument("--n", type=int, help="storage nodes")
    code.add_argument("--k", type=int, help="reconstruction degree")
    code.add_argument("--d", type=int, help="repair degree")
    code.add_argument("--repair-from", dest="repair_from", choices=("n+1", "n+2"))

    parser = argparse.ArgumentParser(prog="d2dregen", description="Storage scheme costs for D2D caching")
    commands = parser.add_subparsers(dest="command", required=True)

    costs = commands.add_parser("costs", parents=[common, system, code], help="closed-form cost of a scheme")
    costs.add_argument("--all", dest="all_schemes", action="store_true", help="every scheme side by side")

    sim = commands.add_parser("simulate", parents=[common, system, code], help="event-driven simulation")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--events", type=int)
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--batch-count", dest="batch_count", type=int)
    sim.add_argument("--coupling", choices=("deterministic", "strict"))
    sim.add_argument("--start", choices=("warm", "cold"))
    sim.add_argument("--compare-analytic", dest="compare_analytic", action="store_true")

    sweep = commands.add_parser("sweep", parents=[common, system, code], help="best cost along a popularity grid")
    sweep.add_argument("--p-from", dest="p_from", type=float)
    sweep.add_argument("--p-to", dest="p_to", type=float)
    sweep.add_argument("--points", type=int)
    sweep.add_argument("--by-k", dest="by_k", action="store_true", help="per-k costs at --p instead")

    thresholds = commands.add_parser("thresholds", parents=[common, code], help="switching thresholds over (R, N)")
    thresholds.add_argument("--R-grid", dest="R_grid", type=_float_list)
    thresholds.add_argument("--N-grid", dest="N_grid", type=_float_list)

    commands.add_parser("tradeoff", parents=[common, code], help="reconstruction vs repair bandwidth over d")
    return parser


def settings_defaults(settings: dict) -> ExperimentConfig:
    """ExperimentConfig whose defaults come from the project settings"""
    sim, planner = settings["simulator"], settings["planner"]
    return dataclasses.replace(
        ExperimentConfig(),
        n=planner["n"],
        d=planner["d"],
        batch_count=sim["batch_count"],
        coupling=sim["coupling"],
        start=sim["start"],
        repair_from="n+1" if settings["cost_model"]["repair_offset"] == 1 else "n+2",
        format=settings["output"]["format"],
    )


def resolve_experiment(args: argparse.Namespace, settings: dict) -> ExperimentConfig:
    """Settings defaults, then the experiment config file (if any), then the flags actually given"""
    base = settings_defaults(settings)
    config = load_experiment(args.config, base=base) if getattr(args, "config", None) else base
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    overrides = {name: value for name, value in vars(args).items() if name in names}
    return dataclasses.replace(config, **overrides)


def _repair_offset(config: ExperimentConfig) -> int:
    return 1 if config.repair_from == "n+1" else 2


def _effective_settings(settings: dict, config: ExperimentConfig) -> dict:
    effective = copy.deepcopy(settings)
    effective["cost_model"]["repair_offset"] = _repair_offset(config)
    return effective


def _write(table: pd.DataFrame, config: ExperimentConfig, settings: dict):
    write_table(table, config.format, config.out, settings["output"]["significant_digits"])


# ----- commands --------------------------------------------------------------

def cmd_costs(config: ExperimentConfig, settings: dict, all_schemes: bool = False) -> pd.DataFrame:
    params = config.system_params()
    options = CostOptions.from_settings(_effective_settings(settings, config)).as_kwargs()

    rows = []
    for name in (SCHEME_NAMES if all_schemes else [config.scheme]):
        scheme = config.scheme_object(name)
        row = {"scheme": scheme.label, "n": np.nan, "k": np.nan, "d": np.nan}
        row.update({term: np.nan for term in COST_TERMS})
        if isinstance(scheme, (Mbr, Msr)):
            validate_against_population(scheme.code, params.N)
            row.update(n=scheme.code.n, k=scheme.code.k, d=scheme.code.d)
        elif isinstance(scheme, Replication):
            row.update(n=scheme.n, k=1)
        if isinstance(scheme, (Mbr, Msr, Replication)):
            breakdown = scheme_breakdown(params, scheme, **options)
            row.update({term: getattr(breakdown, term) for term in COST_TERMS})
            row["total"] = breakdown.total
        else:
            row["total"] = scheme_cost(params, scheme, **options)
        rows.append(row)

    return pd.DataFrame(rows, columns=["scheme", "n", "k", "d", *COST_TERMS, "total"])


def _report_row(report: SimReport) -> dict:
    row = {
        "elapsed_sim_time": report.elapsed_sim_time,
        "total_cost": report.total_cost,
        "mean_cost_rate": report.mean_cost_rate,
        "ci_halfwidth_95": report.ci_halfwidth_95,
        "drift_diagnostic": report.drift_diagnostic,
    }
    for name, count in report.transitions.items():
        row[f"{name}s"] = count
    for category in CATEGORIES:
        row[f"cost_{category}"] = report.cost_by_category[category]
        row[f"events_{category}"] = report.event_counts[category]
    return row


def cmd_simulate(config: ExperimentConfig, settings: dict, compare_analytic: bool = False) -> pd.DataFrame:
    sim_settings = settings["simulator"]
    max_events, max_time = config.events, config.horizon
    if max_events is None and max_time is None:
        max_events = sim_settings["default_events"]

    sim_config = SimConfig(
        params=config.system_params(),
        scheme=config.scheme_object(),
        seed=config.seed,
        max_events=max_events,
        max_time=max_time,
        policy=SimPolicy(repair_from=config.repair_from, state_coupling=config.coupling, start=config.start),
        batch_count=config.batch_count,
        min_events_per_batch=sim_settings["min_events_per_batch"],
    )

    row = {"scheme": sim_config.scheme.label, "seed": config.seed}
    if not compare_analytic:
        row.update(_report_row(ChurnSimulator(sim_config, draw_block=sim_settings["draw_block"]).run()))
        return pd.DataFrame([row])

    comparison = compare_to_analytic(sim_config, draw_block=sim_settings["draw_block"],
                                     options=CostOptions.from_settings(settings))
    row.update(_report_row(comparison.report))
    row.update({
        "analytic_rate": comparison.analytic_rate,
        "relative_error": comparison.relative_error,
        "inside_ci": comparison.inside_ci,
    })
    for category, (analytic, _) in comparison.terms.items():
        row[f"analytic_{category}"] = analytic
    row["flags"] = "; ".join(comparison.flags)
    return pd.DataFrame([row])


def cmd_sweep(config: ExperimentConfig, settings: dict) -> pd.DataFrame:
    planner = MethodPlanner(settings=_effective_settings(settings, config)).with_space(config.n, config.d)
    if config.by_k:
        return planner.by_k(config.system_params())

    if config.points == 1 and 0 < config.p_from == config.p_to:
        return planner.sweep(config.R, config.N, [config.p_from])
    if not 0 < config.p_from < config.p_to:
        raise InvalidParameterError(f"0 < p_from < p_to required, got [{config.p_from}, {config.p_to}]")
    if config.points < 2:
        raise InvalidParameterError(f"points >= 2 required (or 1 with p_from = p_to), got {config.points}")
    p_grid = np.geomspace(config.p_from, config.p_to, config.points)
    return planner.sweep(config.R, config.N, p_grid)


def cmd_thresholds(config: ExperimentConfig, settings: dict) -> pd.DataFrame:
    planner = MethodPlanner(settings=_effective_settings(settings, config)).with_space(config.n, config.d)
    surface = planner.surface(config.R_grid, config.N_grid)

    for column in ("p1", "p2", "p3"):
        try:
            fit = fit_log_threshold(surface, column)
        except InvalidParameterError:
            continue
        logger.info(f"log10 {column} = {fit['slope']:.4g} log10 N + {fit['intercept']:.4g} "
                    f"(max residual {fit['max_residual']:.3g})")
    return surface


def cmd_tradeoff(config: ExperimentConfig) -> pd.DataFrame:
    if config.d < config.k:
        raise InvalidParameterError(f"d >= k required, got k={config.k}, d={config.d}")
    rows = tradeoff_curve(1, config.k, range(config.k, config.d + 1))
    table = pd.DataFrame(rows)
    value_columns = [c for c in table.columns if c not in ("d", "k")]
    table[value_columns] = table[value_columns].astype(float)
    return table


def run(args: argparse.Namespace) -> int:
    settings = load_settings(args.settings)
    configure_logging(settings)
    config = resolve_experiment(args, settings)

    if args.command == "costs":
        _write(cmd_costs(config, settings, getattr(args, "all_schemes", False)), config, settings)
    elif args.command == "simulate":
        _write(cmd_simulate(config, settings, getattr(args, "compare_analytic", False)), config, settings)
    elif args.command == "sweep":
        _write(cmd_sweep(config, settings), config, settings)
    elif args.command == "thresholds":
        surface = cmd_thresholds(config, settings)
        _write(surface, config, settings)
        if surface[["p1", "p2", "p3"]].isna().all().all():
            raise NoCrossingError("no threshold crossing anywhere on the (R, N) grid")
    elif args.command == "tradeoff":
        _write(cmd_tradeoff(config), config, settings)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand

    Returns:
        0 on success, 2 on invalid parameters, 3 when a run is under-sampled,
        4 when no threshold crossing exists on the whole grid
    """
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (InvalidParameterError, NoRequestsError) as e:
        logger.error(f"❌ invalid parameters: {e}")
        return EXIT_INVALID
    except UnderSampledError as e:
        logger.error(f"❌ {e}")
        return EXIT_UNDER_SAMPLED
    except NoCrossingError as e:
        logger.warning(f"⚠️ {e}")
        return EXIT_NO_CROSSING


if __name__ == "__main__":
    sys.exit(main())
