from src.data.dataset import (
    CsvSchema,
    Dataset,
    GroupStats,
    ScoredSample,
    align_groups,
    group_stats,
    load_csv,
    split,
    write_csv,
)
from src.data.synth import synth_generate

__all__ = [
    "CsvSchema",
    "Dataset",
    "GroupStats",
    "ScoredSample",
    "align_groups",
    "group_stats",
    "load_csv",
    "split",
    "synth_generate",
    "write_csv",
]
