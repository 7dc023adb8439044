"""Repeat the pipeline over several seeds and aggregate mean +/- sd.

Usage:
    python scripts/run_seeds.py --config configs/compas.toml --seeds 10
    python scripts/run_seeds.py --config configs/synthetic.toml --seeds 5 --first-seed 100
"""

import argparse
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Multi-seed rocf driver")
    parser.add_argument("--config", type=Path, required=True, help="TOML or JSON run configuration")
    parser.add_argument("--seeds", type=int, default=10, help="Number of seeds (default: 10)")
    parser.add_argument("--first-seed", type=int, default=0, help="First seed (default: 0)")
    parser.add_argument("--out-dir", type=Path, default=Path("runs/seeds"), help="Output directory")
    parser.add_argument("--log-level", default="INFO", help="Logging level (default: INFO)")
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )

    from src.cli import INPUT_ERRORS, run_pipeline
    from src.config import RunConfig
    from src.errors import ConstructionInfeasibleError
    from src.pipeline.constraints import expand_metrics
    from src.pipeline.report import aggregate_seeds, write_report

    logger = logging.getLogger("run_seeds")
    per_method: dict[str, list] = {}
    deltas: dict[str, float] = {}
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        seed_dir = args.out_dir / f"seed_{seed}"
        try:
            cfg = RunConfig.from_file(args.config, {"seed": seed, "out_dir": str(seed_dir)})
            result = run_pipeline(cfg)
        except INPUT_ERRORS as exc:
            logger.error("Input error: %s", exc)
            return 2
        except ConstructionInfeasibleError as exc:
            logger.error("Seed %d: construction infeasible: %s", seed, exc)
            continue
        seed_dir.mkdir(parents=True, exist_ok=True)
        result.recipe.save(seed_dir / "recipe.json")
        write_report(result.report, seed_dir)
        deltas = expand_metrics(cfg.constraints.metrics)
        for label, report in result.report.results.items():
            per_method.setdefault(label, []).append(report)

    if not per_method:
        logger.error("No seed produced a result")
        return 3
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for label, reports in per_method.items():
        summary = aggregate_seeds(reports, deltas)
        path = args.out_dir / f"aggregate_{label}.csv"
        summary.to_csv(path)
        print(f"{label} ({len(reports)} seeds)")
        print(summary.to_string(float_format=lambda v: f"{v:.4f}"))
        print()
        logger.info("Wrote %s", path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
