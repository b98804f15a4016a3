"""CSV logs and JSON summaries for simulation runs."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import KoopFxtError
from .runner import RunLog

BASE_COLUMNS = ("t", "x", "y", "vx", "vy", "ax", "ay", "dx_true", "dy_true", "dx_hat", "dy_hat", "delta")
TAIL_COLUMNS = ("qp_active", "qp_iters", "slack")


class OutputError(KoopFxtError):
    def __init__(self, path, cause: Exception):
        self.path = str(path)
        super().__init__(f"{path}: {cause}")


def csv_header(n_obstacles: int = 2) -> list[str]:
    return [*BASE_COLUMNS, *(f"h{i + 1}" for i in range(n_obstacles)), *TAIL_COLUMNS]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_csv(log: RunLog, path, decimation: int = 10) -> Path:
    """Write every ``decimation``-th row; floats carry 17 significant digits."""
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    path = Path(path)
    idx = range(0, log.steps, decimation)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(csv_header(log.h.shape[1]))
            for k in idx:
                row = [log.t[k], *log.z[k], *log.u[k], *log.d_true[k], *log.d_hat[k], log.delta[k]]
                w.writerow(
                    [_fmt(v) for v in row]
                    + [_fmt(v) for v in log.h[k]]
                    + [str(int(log.qp_active[k])), str(int(log.qp_iters[k])), _fmt(log.slack[k])]
                )
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path


@dataclass
class CsvLog:
    """Columns of an emitted CSV, keyed by header name."""

    name: str
    columns: dict

    def __getitem__(self, key) -> np.ndarray:
        return self.columns[key]

    @property
    def h(self) -> np.ndarray:
        keys = sorted((k for k in self.columns if k[0] == "h" and k[1:].isdigit()), key=lambda k: int(k[1:]))
        return np.column_stack([self.columns[k] for k in keys])


def read_csv(path) -> CsvLog:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError(path, exc) from exc
    if not rows:
        raise OutputError(path, ValueError("empty CSV"))
    header, body = rows[0], rows[1:]
    missing = set(BASE_COLUMNS) - set(header)
    if missing:
        raise OutputError(path, ValueError(f"missing columns {sorted(missing)}"))
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return CsvLog(path.stem, {name: data[:, i] for i, name in enumerate(header)})


def emit_summary(log: RunLog, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(log.summary(), indent=2) + "\n")
    except OSError as exc:
        raise OutputError(path, exc) from exc
    return path
