"""Fit a logistic score on TRAIN and write the score/group/label CSV.

Input is the cleaned COMPAS file described in docs/data_schema.md (one row per
individual, race restricted to African-American and Caucasian). The model is
a scikit-learn pipeline (standardised numerics, one-hot categoricals, L2
logistic regression) fitted on the TRAIN part of the seeded 30/35/35 split;
``rocf run`` on the output with the same seed and fractions reuses exactly the
same TRAIN rows, so POST and TEST stay unseen.

Needs the ``prep`` extra: pip install -e ".[prep]"

Usage:
    python scripts/prepare_compas_scores.py --input compas_clean.csv --output compas_scores.csv
    python scripts/prepare_compas_scores.py --input compas_clean.csv --output out.csv --seed 3 --C 0.5
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.compose import ColumnTransformer
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import OneHotEncoder, StandardScaler

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

logger = logging.getLogger("prepare_compas_scores")

NUMERIC = ["age", "priors_count", "length_of_stay"]
CATEGORICAL = ["c_charge_degree", "sex"]
GROUP_COL = "race"
LABEL_COL = "is_recid"


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Prepare logistic scores for the cleaned COMPAS data")
    parser.add_argument("--input", type=Path, required=True, help="Cleaned COMPAS CSV")
    parser.add_argument("--output", type=Path, required=True, help="score/group/label CSV to write")
    parser.add_argument("--seed", type=int, default=0, help="Split seed (default: 0)")
    parser.add_argument("--C", type=float, default=1.0, help="Inverse L2 strength (default: 1.0)")
    return parser.parse_args(argv)


def build_model(c: float) -> Pipeline:
    features = ColumnTransformer(
        [
            ("numeric", StandardScaler(), NUMERIC),
            ("categorical", OneHotEncoder(handle_unknown="ignore"), CATEGORICAL + [GROUP_COL]),
        ]
    )
    return make_pipeline(features, LogisticRegression(C=c, max_iter=1000))


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S",
    )

    from src.config import DataConfig
    from src.data.dataset import Dataset, split
    from src.errors import DataError

    frame = pd.read_csv(args.input)
    missing = [c for c in NUMERIC + CATEGORICAL + [GROUP_COL, LABEL_COL] if c not in frame.columns]
    if missing:
        logger.error("Missing column(s) %s in %s", missing, args.input)
        return 2
    frame[CATEGORICAL + [GROUP_COL]] = frame[CATEGORICAL + [GROUP_COL]].astype(str)

    labels = frame[LABEL_COL].to_numpy(dtype=np.int64)
    codes, names = pd.factorize(frame[GROUP_COL], sort=False)
    try:
        placeholder = Dataset.from_arrays(
            np.zeros(len(frame)), codes, labels, group_count=len(names), group_names=tuple(names)
        )
        train, _, _ = split(placeholder, DataConfig().fractions, args.seed)
    except DataError as exc:
        logger.error("Input error: %s", exc)
        return 2

    model = build_model(args.C)
    model.fit(frame.iloc[train.row_ids], labels[train.row_ids])
    scores = model.predict_proba(frame)[:, 1]
    train_acc = model.score(frame.iloc[train.row_ids], labels[train.row_ids])
    logger.info("Fitted logistic model on %d TRAIN rows (accuracy %.4f)", len(train), train_acc)

    out = pd.DataFrame({"score": scores, "group": frame[GROUP_COL], "label": labels})
    args.output.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(args.output, index=False, float_format="%.17g")
    logger.info("Wrote %d rows to %s", len(out), args.output)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
