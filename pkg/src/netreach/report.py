"""Deterministic key-value reports.

Floats are written as their shortest round-trip decimal followed by the
hexadecimal form, so a report pins every bit of the numbers it contains.
Arrays get one line per row, with a parallel ``.hex`` line.
"""
from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["Report", "format_float"]


def format_float(x):
    x = float(x)
    return f"{x!r} {x.hex()}"


def _row(vals, hexed):
    if hexed:
        return " ".join(float(v).hex() for v in vals)
    return " ".join(repr(float(v)) for v in vals)


def _jsonable(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        return x if math.isfinite(x) else repr(x)
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()] if value.ndim else _jsonable(value.item())
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class Report:
    """Ordered key-value report; ``seed`` is always the second field."""

    def __init__(self, command, seed):
        self.items = [("command", command), ("seed", int(seed))]

    def add(self, key, value):
        self.items.append((key, value))
        return self

    def get(self, key):
        for k, v in self.items:
            if k == key:
                return v
        raise KeyError(key)

    def to_text(self):
        lines = []
        for key, value in self.items:
            if value is None:
                lines.append(f"{key}: none")
            elif isinstance(value, (bool, np.bool_)):
                lines.append(f"{key}: {'true' if value else 'false'}")
            elif isinstance(value, (int, np.integer)):
                lines.append(f"{key}: {int(value)}")
            elif isinstance(value, (float, np.floating)):
                lines.append(f"{key}: {format_float(value)}")
            elif isinstance(value, np.ndarray) and value.dtype.kind in "fiu":
                arr = np.atleast_1d(value.astype(float))
                if arr.ndim == 1:
                    lines.append(f"{key}: {_row(arr, False)}")
                    lines.append(f"{key}.hex: {_row(arr, True)}")
                else:
                    lines.append(f"{key}.shape: {' '.join(str(s) for s in arr.shape)}")
                    for i, row in enumerate(arr, 1):
                        lines.append(f"{key}[{i}]: {_row(row, False)}")
                        lines.append(f"{key}[{i}].hex: {_row(row, True)}")
            elif isinstance(value, (list, tuple)):
                if not value:
                    lines.append(f"{key}: none")
                for item in value:
                    lines.append(f"{key}: {item}")
            else:
                lines.append(f"{key}: {value}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps({k: _jsonable(v) for k, v in self.items}, indent=2) + "\n"
