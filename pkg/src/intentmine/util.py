"""Deterministic serialization helpers.

All artifacts are written with floats capped at 9 significant digits and LF
newlines so re-running a stage with unchanged inputs is byte-identical.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np


def fmt_float(x: float) -> str:
    """Shortest representation capped at 9 significant digits."""
    return format(float(x), ".9g")


def round9(x: float) -> float:
    return float(fmt_float(x))


def json_ready(obj: Any) -> Any:
    """Recursively convert to JSON-safe types with 9-digit floats."""
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return round9(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(json_ready(obj), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
