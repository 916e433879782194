"""Report records and their serialisation.

A report is a plain nested dict.  :func:`to_json` makes it JSON-safe
(tuples become lists, sets sorted lists, non-finite floats the strings
``"inf"``, ``"-inf"`` and ``"nan"``) and writes it with sorted keys, so two
runs with equal inputs give byte-identical output apart from ``timing``.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["build_report", "jsonable", "to_json", "from_json", "write_tables"]

TIMING_KEY = "timing"


def build_report(command, inputs, results, seed=None, tolerances=None, timing=None, error=None):
    from . import __version__

    rep = {
        "tool": "metastab",
        "version": __version__,
        "command": command,
        "seed": seed,
        "tolerances": dict(tolerances or {}),
        "input": inputs,
        "results": results,
        TIMING_KEY: dict(timing or {}),
    }
    if error is not None:
        rep["error"] = error
    return rep


def _key(k):
    return k if isinstance(k, str) else json.dumps(jsonable(k))


def jsonable(obj):
    if isinstance(obj, dict):
        return {_key(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted((jsonable(v) for v in obj), key=repr)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
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
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    return repr(obj)


def to_json(report) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def from_json(text):
    return json.loads(text)


def write_tables(tables, directory):
    """Write ``{name: (header, rows)}`` as ``<directory>/<name>.csv``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, (header, rows) in sorted(tables.items()):
        p = out / f"{name}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([jsonable(v) if not isinstance(v, str) else v for v in row])
        paths.append(str(p))
    return paths
