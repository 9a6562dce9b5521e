"""
Result emission: one CSV per algorithm, a JSON metadata sidecar and the resolved config.

Floats are written with repr, which round-trips every double exactly.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from ..errors import InvalidInputError, StorageError
from .metrics import AggregateMetrics
from .runner import ExperimentRun

logger = logging.getLogger("perfclip.harness.output")

EXTRA_SERIES = ("tpr", "tnr")


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return "" if value is None else str(value)


def metric_columns(metrics: AggregateMetrics) -> Dict[str, np.ndarray]:
    """Columns of the CSV for one algorithm, in schema order."""
    if metrics.t.size == 0:
        raise InvalidInputError(f"no recorded points for {metrics.algorithm}; refusing to write an empty table")
    columns = {
        "t": metrics.t,
        "mean": metrics.mean,
        "stderr": metrics.stderr,
        "n": np.full(metrics.t.size, metrics.n, dtype=np.int64),
    }
    if metrics.bound is not None:
        columns["bound"] = metrics.bound
    if "e_norm_sq" in metrics.series_means:
        columns["e_norm_sq_mean"] = metrics.series_means["e_norm_sq"]
    for name in EXTRA_SERIES:
        if name in metrics.series_means:
            columns[f"{name}_mean"] = metrics.series_means[name]
    return columns


def write_table(rows: Sequence[Dict[str, Any]], path: Union[str, Path]) -> Path:
    """
    Write dict rows as CSV (columns from the first row).

    Raises:
        InvalidInputError: If there are no rows
        StorageError: If the file cannot be written
    """
    if not rows:
        raise InvalidInputError("no rows to write")
    path = Path(path)
    fields = list(rows[0])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(fields)
            for row in rows:
                writer.writerow([format_value(row[name]) for name in fields])
    except OSError as e:
        raise StorageError(f"cannot write table ({e.strerror})", str(path))
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write JSON ({e.strerror})", str(path))
    return path


def to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def emit_results(run: ExperimentRun, out_dir: Union[str, Path], fmt: str = "csv") -> List[Path]:
    """
    Write {algorithm}.csv for every algorithm, metadata.json and config.json.

    Returns:
        Paths written

    Raises:
        InvalidInputError: If a metric has no recorded points or fmt is not csv
        StorageError: On any I/O failure, naming the path
    """
    if fmt != "csv":
        raise InvalidInputError(f"unsupported output format '{fmt}'")
    if not run.metrics:
        raise InvalidInputError("the run holds no metrics")
    out_dir = Path(out_dir)
    written = []
    for name, metrics in run.metrics.items():
        columns = metric_columns(metrics)
        rows = [{key: values[i] for key, values in columns.items()} for i in range(metrics.t.size)]
        written.append(write_table(rows, out_dir / f"{name}.csv"))
    written.append(write_json(run.metadata(), out_dir / "metadata.json"))
    written.append(write_json(run.config.resolved(), out_dir / "config.json"))
    logger.info(f"Results written to {out_dir}")
    return written


def _cell(cell: str):
    try:
        return float(cell)
    except ValueError:
        return cell


def read_table(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Read a CSV written by write_table back into float columns."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [row for row in reader]
    except (OSError, StopIteration) as e:
        raise StorageError(f"cannot read table ({e})", str(path))
    columns = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            columns[name].append(_cell(cell))
    return {name: np.asarray(values) for name, values in columns.items()}
