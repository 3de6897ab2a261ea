"""
Result Files and Reports

Writes experiment rows as CSV (fixed columns) and JSON, reads result CSVs
back, and aggregates them into mean ± std tables per method and model
kinds.
"""
import csv
import json
import logging
from typing import List, Optional, Sequence

import pandas as pd

from ..models.result_models import CSV_COLUMNS, ResultRow
from .errors import DataError

logger = logging.getLogger(__name__)

GROUP_KEYS = ["method", "target_kind", "clone_kind"]
SWEEP_COLUMNS = [
    "k",
    "available_fraction",
    "aux_fraction",
    "overlap_ratio",
    "query_fraction",
    "mix_count",
    "ranking_loss",
    "positive_loss",
]
TEXT_COLUMNS = {"experiment_id", "method", "target_kind", "clone_kind", "ranking_loss", "positive_loss", "status", "error"}
NUMERIC_COLUMNS = [c for c in CSV_COLUMNS if c not in TEXT_COLUMNS] + ["seconds"]
AGGREGATE_COLUMNS = ("runs", "agreement_mean", "agreement_std", "recall_raw_mean", "recall_defended_mean")


def write_results_csv(rows: Sequence[ResultRow], path: str, timings: bool = False) -> None:
    columns = CSV_COLUMNS + (["seconds"] if timings else [])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row.csv_record(timings))
    logger.info(f"Wrote {len(rows)} result rows to {path}")


def write_results_json(rows: Sequence[ResultRow], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump([row.model_dump() for row in rows], f, indent=2)
        f.write("\n")


def _normalize(df: pd.DataFrame) -> pd.DataFrame:
    df = df.copy()
    for column in df.columns:
        if column in TEXT_COLUMNS:
            df[column] = df[column].fillna("").astype(str)
        elif column in NUMERIC_COLUMNS:
            df[column] = pd.to_numeric(df[column], errors="coerce")
    return df


def rows_to_frame(rows: Sequence[ResultRow]) -> pd.DataFrame:
    return _normalize(pd.DataFrame([row.model_dump() for row in rows], columns=CSV_COLUMNS + ["seconds"]))


def read_results_csv(paths: Sequence[str]) -> pd.DataFrame:
    """Concatenate result CSVs; missing required columns raise DataError."""
    frames = []
    for path in paths:
        df = pd.read_csv(path, keep_default_na=False, na_values=[""], float_precision="round_trip")
        missing = [c for c in CSV_COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"{path} is not a result file (missing columns: {', '.join(missing)})")
        frames.append(df)
    if not frames:
        raise DataError("No result files given")
    return _normalize(pd.concat(frames, ignore_index=True))


def aggregate(df: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and std of agreement (and mean recall) over successful runs,
    grouped by method, kinds and every sweep column that varies.
    """
    ok = df[df["status"] == "ok"]
    if ok.empty:
        return pd.DataFrame(columns=GROUP_KEYS + list(AGGREGATE_COLUMNS))
    varying = [c for c in SWEEP_COLUMNS if c in ok.columns and ok[c].nunique(dropna=False) > 1]
    keys = GROUP_KEYS + varying
    grouped = ok.groupby(keys, dropna=False, sort=True)
    result = grouped.agg(
        runs=("agreement", "size"),
        agreement_mean=("agreement", "mean"),
        agreement_std=("agreement", "std"),
        recall_raw_mean=("recall_raw", "mean"),
        recall_defended_mean=("recall_defended", "mean"),
    ).reset_index()
    result["agreement_std"] = result["agreement_std"].fillna(0.0)
    return result


def format_table(summary: pd.DataFrame, digits: int = 4) -> str:
    """Render an aggregate frame as a plain-text mean±std table."""
    if summary.empty:
        return "(no successful runs)"
    view = summary.drop(columns=["agreement_mean", "agreement_std", "recall_raw_mean", "recall_defended_mean"])
    view["agreement"] = [
        f"{mean:.{digits}f}±{std:.{digits}f}"
        for mean, std in zip(summary["agreement_mean"], summary["agreement_std"])
    ]
    view["recall_raw"] = summary["recall_raw_mean"].map(lambda v: f"{v:.{digits}f}" if pd.notna(v) else "-")
    view["recall_defended"] = summary["recall_defended_mean"].map(
        lambda v: f"{v:.{digits}f}" if pd.notna(v) else "-"
    )
    return view.to_string(index=False)


def report(paths: Sequence[str], out: Optional[str] = None) -> pd.DataFrame:
    """Aggregate result files, optionally writing the aggregate as CSV."""
    summary = aggregate(read_results_csv(paths))
    if out:
        summary.to_csv(out, index=False)
        logger.info(f"Wrote aggregate table to {out}")
    return summary


def error_rows(df: pd.DataFrame) -> List[str]:
    failed = df[df["status"] != "ok"]
    return [f"seed {row.seed} {row.method}: {row.error}" for row in failed.itertuples()]
