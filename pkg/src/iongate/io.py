"""Deterministic JSON/CSV artifacts and run manifests.

Floats are written with 17 significant digits so a re-run with the same
inputs produces byte-identical files.  Non-finite floats become ``null``.
"""
from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np
import scipy

SCHEMA_VERSION = 1
FLOAT_FORMAT = ".17g"


def _float(x: float) -> str:
    if not np.isfinite(x):
        return "null"
    s = format(float(x), FLOAT_FORMAT)
    # Keep floats recognisable as floats when read back.
    return s if any(c in s for c in ".eE") else s + ".0"


def to_plain(obj):
    """Convert numpy scalars/arrays, tuples and dataclass-like objects to JSON types."""
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value"):                # enums
        return to_plain(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for n, (k, v) in enumerate(sorted(obj.items())):
            out.append(pad + json.dumps(k) + ": ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if n < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
        elif all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for n, v in enumerate(obj):
                if n:
                    out.append(", ")
                _emit(v, indent, level + 1, out)
            out.append("]")
        else:
            out.append("[\n")
            for n, v in enumerate(obj):
                out.append(pad)
                _emit(v, indent, level + 1, out)
                out.append(",\n" if n < len(obj) - 1 else "\n")
            out.append(end + "]")
    elif isinstance(obj, bool) or obj is None or isinstance(obj, (str, int)):
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(to_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return _float(v) if np.isfinite(v) else ""
    return v


def write_csv(path, header, rows) -> Path:
    """Comma-separated, '.' decimal, one header row.  Missing or non-finite values are empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def versions() -> dict:
    from . import __version__
    return {"iongate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def manifest(command: str, inputs: dict, seed: int | None, outputs) -> dict:
    """Everything needed to repeat a run bit for bit."""
    return {"schema_version": SCHEMA_VERSION, "command": command, "inputs": to_plain(inputs),
            "seed": seed, "versions": versions(), "outputs": sorted(str(p) for p in outputs)}
