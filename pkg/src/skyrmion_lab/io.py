"""CSV and JSON writers with a provenance header line."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__


def header_line(config_hash: str) -> str:
    return f"# skyrmion_lab {__version__} config={config_hash}"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, columns: dict, config_hash: str) -> Path:
    """Write equal-length columns with 17 significant digits."""
    path = Path(path)
    names = list(columns)
    data = [np.ravel(np.asarray(columns[n], float)) for n in names]
    lengths = {len(c) for c in data}
    if len(lengths) != 1:
        raise ValueError("columns must have equal length")
    lines = [header_line(config_hash), ",".join(names)]
    lines.extend(",".join(_fmt(x) for x in row) for row in zip(*data))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path) -> dict:
    """Inverse of :func:`write_csv`."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    names = lines[0].strip().split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
    data = data.reshape(-1, len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def write_json(path, obj, config_hash: str) -> Path:
    """JSON preceded by the header comment line; non-finite floats become ``null``."""
    path = Path(path)
    body = json.dumps(_plain(obj), indent=2, sort_keys=False)
    path.write_text(header_line(config_hash) + "\n" + body + "\n")
    return path


def read_json(path):
    with open(path) as fh:
        text = "".join(ln for ln in fh if not ln.startswith("#"))
    return json.loads(text)


def write_field_csv(path, field, config_hash: str) -> Path:
    X, Y = field.grid.mesh()
    m = field.values
    return write_csv(path, {"x": X, "y": Y, "m1": m[0], "m2": m[1], "m3": m[2]}, config_hash)
