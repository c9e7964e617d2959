"""JSON and CSV emission with deterministic formatting."""

from __future__ import annotations

import csv
import json
import sys

import numpy as np


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj if obj == obj and abs(obj) != float("inf") else repr(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return repr(obj)


def dump_json(payload: dict, path: str | None = None) -> str:
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return text


def write_csv(path: str, header: list, rows: list):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([to_jsonable(v) for v in row])


def write_cells_jsonl(path: str, cells: list):
    """Cover cells as JSON lines {nu, center, radius, color}."""
    with open(path, "w") as fh:
        for cell in cells:
            fh.write(json.dumps(to_jsonable(cell.as_dict()), sort_keys=True) + "\n")
