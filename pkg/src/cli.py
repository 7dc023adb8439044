"""Command-line entry point.

Usage:
    rocf run --config configs/synthetic.toml --seed 3
    rocf hull --csv scores.csv --out-dir runs/hulls
    rocf oracle --config configs/compas.toml
    rocf synth --seed 0 --out-dir data
    rocf eval-recipe --recipe runs/recipe.json --csv test.csv

Exit codes: 0 success, 2 input error, 3 infeasible construction, 4 internal fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # Python 3.10: API-identical backport
    import tomli as tomllib
from dataclasses import dataclass
from pathlib import Path

from pydantic import ValidationError

from src.config import MechanismKind, RunConfig, settings
from src.data.dataset import CsvSchema, Dataset, align_groups, group_stats, load_csv, split, write_csv
from src.data.synth import synth_generate
from src.errors import ConstructionInfeasibleError, DataError
from src.pipeline.constraints import LossSpec, loss_from_config, specs_from_config
from src.pipeline.construct import Recipe, construct_recipe
from src.pipeline.evaluation import evaluate_baseline, evaluate_recipe, oracle_rates
from src.pipeline.linprog import dump_problem, solve
from src.pipeline.region import GuardResult, build_inner_lp, diagnostics_table, feasibility_guard
from src.pipeline.report import (
    GroupTarget,
    GuardSummary,
    RunReport,
    format_table,
    write_report,
)
from src.pipeline.roc import GroupHull, build_hulls, hull_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

INPUT_ERRORS = (DataError, ValidationError, FileNotFoundError, tomllib.TOMLDecodeError, json.JSONDecodeError)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    common.add_argument("--csv", type=Path, help="Scored CSV (overrides data.csv)")
    common.add_argument("--seed", type=int, help="Split and randomization seed")
    common.add_argument("--out-dir", type=Path, help="Directory for output files")
    common.add_argument("--score-col", help="Score column name (default: score)")
    common.add_argument("--group-col", help="Group column name (default: group)")
    common.add_argument("--label-col", help="Label column name (default: label)")
    common.add_argument(
        "--mechanism",
        choices=[m.value for m in MechanismKind],
        help="Randomization mechanism: ad (anti-diagonal) or lf (label flipping)",
    )
    common.add_argument("--log-level", help=f"Logging level (default: {settings.log_level})")
    common.add_argument("--diagnostics", action="store_true", help="Write per-grid-point CSV")
    common.add_argument("--dump-lp", action="store_true", help="Write the selected inner LP as text")
    common.add_argument("--with-oracle", action="store_true", help="Attach the TEST oracle to the run report")

    parser = argparse.ArgumentParser(
        prog="rocf", description="Fairness post-processing over group ROC hulls"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="Split, optimise, construct and evaluate")
    sub.add_parser("hull", parents=[common], help="Write POST-set hull vertices as CSV")
    sub.add_parser("oracle", parents=[common], help="Region search on the TEST split")
    sub.add_parser("synth", parents=[common], help="Generate a synthetic scored CSV")
    evaluate = sub.add_parser("eval-recipe", parents=[common], help="Evaluate a saved recipe on a CSV")
    evaluate.add_argument("--recipe", type=Path, required=True, help="recipe.json from a previous run")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "out_dir": str(args.out_dir) if args.out_dir else None,
        "data": {
            "csv": str(args.csv) if args.csv else None,
            "score_col": args.score_col,
            "group_col": args.group_col,
            "label_col": args.label_col,
        },
        "construct": {"mechanism": args.mechanism},
        "diagnostics": True if args.diagnostics else None,
        "dump_lp": True if args.dump_lp else None,
        "with_oracle": True if args.with_oracle else None,
    }
    return RunConfig.from_file(args.config, overrides)


def _schema(cfg: RunConfig) -> CsvSchema:
    return CsvSchema(cfg.data.score_col, cfg.data.group_col, cfg.data.label_col)


def load_splits(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    """(POST, TEST): either the configured pre-split files or a seeded split of data.csv."""
    schema = _schema(cfg)
    if cfg.data.post_csv is not None:
        post = load_csv(cfg.data.post_csv, schema)
        test = align_groups(load_csv(cfg.data.test_csv, schema), post.group_names)
        return post, test
    if cfg.data.csv is None:
        raise DataError("no input data: set data.csv or data.post_csv/data.test_csv")
    data = load_csv(cfg.data.csv, schema)
    _, post, test = split(data, cfg.data.fractions, cfg.seed)
    return post, test


@dataclass
class PipelineResult:
    hulls: list[GroupHull]
    loss: LossSpec
    guard: GuardResult
    recipe: Recipe
    report: RunReport


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    post, test = load_splits(cfg)
    stats = group_stats(post)
    specs = specs_from_config(cfg.constraints, stats)
    loss = loss_from_config(cfg.loss, stats)
    hulls = build_hulls(post)

    guard = feasibility_guard(hulls, specs, loss, cfg.region, record=cfg.diagnostics)
    recipe = construct_recipe(
        hulls,
        guard.target,
        cfg.construct,
        group_names=post.group_names,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
    )

    label = f"ROCF-{cfg.construct.mechanism.value.upper()}"
    results = {
        "Baseline": evaluate_baseline(test),
        label: evaluate_recipe(recipe, test, cfg.seed, guard),
    }
    report = RunReport(
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        mechanism=cfg.construct.mechanism.value,
        group_names=list(post.group_names),
        post_objective=guard.target.objective,
        post_expected_intervention=recipe.expected_intervention,
        guard=GuardSummary(
            alpha=guard.alpha,
            triggered=guard.triggered,
            alpha_hi=guard.alpha_hi,
            searches=guard.searches,
            baseline_gaps=guard.baseline_gaps,
            deltas={s.label: s.delta for s in guard.specs},
        ),
        targets=[
            GroupTarget(name=name, tpr=r.tpr, fpr=r.fpr)
            for name, r in zip(post.group_names, guard.target.rates)
        ],
        results=results,
    )
    if cfg.with_oracle:
        _, report.oracle = oracle_rates(
            test, cfg.constraints, cfg.region, loss_from_config(cfg.loss, group_stats(test))
        )
    return PipelineResult(hulls=hulls, loss=loss, guard=guard, recipe=recipe, report=report)


def _write_hulls(hulls: list[GroupHull], names: tuple[str, ...], path: Path) -> None:
    hull_table(hulls, names).to_csv(path, index=False, float_format="%.17g")
    logger.info("Wrote %s", path)


def cmd_run(cfg: RunConfig) -> int:
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.json").write_text(cfg.dump() + "\n", encoding="utf-8")

    result = run_pipeline(cfg)
    result.recipe.save(out_dir / "recipe.json")
    write_report(result.report, out_dir)
    _write_hulls(result.hulls, tuple(result.report.group_names), out_dir / "hulls.csv")

    if cfg.diagnostics:
        diagnostics_table(result.guard).to_csv(out_dir / "diagnostics.csv", index=False, float_format="%.17g")
    if cfg.dump_lp:
        target = result.guard.target
        if target.grid_index < 0:
            logger.warning("Target is the baseline fallback; no LP to dump")
        else:
            problem = build_inner_lp(result.hulls, result.guard.specs, result.loss, target.q_fractional)
            (out_dir / "lp_selected.txt").write_text(dump_problem(problem, solve(problem)), encoding="utf-8")

    print(format_table(result.report.results))
    return EXIT_OK


def cmd_hull(cfg: RunConfig) -> int:
    post, _ = load_splits(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _write_hulls(build_hulls(post), post.group_names, cfg.out_dir / "hulls.csv")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    _, test = load_splits(cfg)
    loss = loss_from_config(cfg.loss, group_stats(test))
    _, report = oracle_rates(test, cfg.constraints, cfg.region, loss)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "oracle.json"
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(f"oracle accuracy {report.accuracy:.4f} (alpha {report.alpha:.6g})")
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    data = synth_generate(cfg.synth, cfg.seed)
    path = cfg.synth.out_csv if cfg.synth.out_csv.is_absolute() else cfg.out_dir / cfg.synth.out_csv
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(data, path, _schema(cfg))
    logger.info("Wrote %d rows to %s", len(data), path)
    return EXIT_OK


def cmd_eval_recipe(cfg: RunConfig, recipe_path: Path) -> int:
    if cfg.data.csv is None:
        raise DataError("eval-recipe needs --csv or data.csv")
    try:
        recipe = Recipe.load(recipe_path)
    except FileNotFoundError:
        raise DataError(f"{recipe_path}: file not found") from None
    data = load_csv(cfg.data.csv, _schema(cfg))
    report = evaluate_recipe(recipe, data, cfg.seed)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "eval_report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(format_table({"Recipe": report}))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )
    try:
        cfg = config_from_args(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "hull":
            return cmd_hull(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "synth":
            return cmd_synth(cfg)
        return cmd_eval_recipe(cfg, args.recipe)
    except INPUT_ERRORS as exc:
        logger.error("Input error: %s", exc)
        return EXIT_INPUT
    except ConstructionInfeasibleError as exc:
        logger.error("Construction infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except Exception:
        logger.exception("Internal fault")
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
