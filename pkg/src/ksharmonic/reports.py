"""Deterministic JSON and CSV writers.

Floats are written with ``repr`` so that reruns are byte-identical; non-finite
values become the strings ``"nan"``, ``"inf"`` and ``"-inf"`` to keep the JSON
valid. No timestamps or host data are ever written.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .energy import Mapping
from .geometry import NpcPoint, NpcSpace


def jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, dict)):
        return json.dumps(jsonable(v), separators=(",", ":"))
    return v


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows))
    return path


def point_json(space: NpcSpace, p: NpcPoint) -> dict:
    """Space-tagged coordinates."""
    return {"space": p.space_id, "coords": space.to_json(p)}


def mapping_rows(u: Mapping):
    """Rows ``(vertex, space, coords)`` for a solution CSV."""
    return [(x, p.space_id, u.target.to_json(p)) for x, p in enumerate(u.values)]


def write_mapping(path, u: Mapping) -> Path:
    return write_csv(path, ["vertex", "space", "coords"], mapping_rows(u))
