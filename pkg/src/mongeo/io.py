"""CSV and JSON serialization of sampled fields.

CSV layout::

    # mongeo v1, n=<n>, m=<m>, T=<T>
    <m + 1 rows of n + 1 comma-separated values>

Values are written with 17 significant digits, so reading back gives the
same doubles bit for bit.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .core import MonotoneMap, PathGrid, SpaceGrid, TimeGrid, VelocityField
from .errors import MonotonicityViolation, ValidationError

HEADER_RE = re.compile(
    r"^#\s*mongeo\s+v1\s*,\s*n\s*=\s*(\d+)\s*,\s*m\s*=\s*(\d+)\s*,\s*T\s*=\s*([^,\s]+)\s*$"
)


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_csv(values, T: float = 0.0) -> str:
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    m, n = arr.shape[0] - 1, arr.shape[1] - 1
    lines = [f"# mongeo v1, n={n}, m={m}, T={_fmt(float(T))}"]
    lines += [",".join(_fmt(x) for x in row) for row in arr]
    return "\n".join(lines) + "\n"


def parse_csv(text: str):
    """Parse CSV text into ``(values, n, m, T)``; raises ValidationError on bad layout."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty CSV input")
    match = HEADER_RE.match(lines[0].strip())
    if not match:
        raise ValidationError(f"bad CSV header {lines[0]!r}")
    n, m, T = int(match.group(1)), int(match.group(2)), float(match.group(3))
    rows = []
    # later comment lines (e.g. a truncation note) carry no data
    body = [ln for ln in lines[1:] if not ln.lstrip().startswith("#")]
    for i, ln in enumerate(body):
        try:
            rows.append([float(tok) for tok in ln.split(",")])
        except ValueError as exc:
            raise ValidationError(f"row {i}: {exc}") from None
        if len(rows[-1]) != n + 1:
            raise ValidationError(f"row {i} has {len(rows[-1])} columns, expected {n + 1}")
    if len(rows) != m + 1:
        raise ValidationError(f"expected {m + 1} rows, found {len(rows)}")
    return np.array(rows, dtype=float), n, m, T


def atomic_write(path, data: str | bytes) -> None:
    """Write ``data`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, values, T: float = 0.0) -> None:
    atomic_write(path, format_csv(values, T))


def read_csv(path):
    return parse_csv(Path(path).read_text())


def path_to_csv(path: PathGrid) -> str:
    return format_csv(path.values, path.tgrid.T)


def map_to_csv(phi: MonotoneMap) -> str:
    return format_csv(phi.values[None, :], 0.0)


def map_from_csv(text: str) -> MonotoneMap:
    values, n, m, _ = parse_csv(text)
    if m != 0:
        raise ValidationError(f"expected a single map (m=0), header says m={m}")
    try:
        return MonotoneMap(SpaceGrid(n), values[0])
    except MonotonicityViolation as exc:
        raise MonotonicityViolation(f"row 0, column {exc.column}: {exc}", row=0, column=exc.column) from None


def path_from_csv(text: str) -> PathGrid:
    values, n, m, T = parse_csv(text)
    if m == 0:
        raise ValidationError("a path needs at least two time nodes")
    return PathGrid(TimeGrid(m, T), SpaceGrid(n), values)


def velocity_to_csv(v: VelocityField) -> str:
    return format_csv(v.values, v.tgrid.T)


def velocity_from_csv(text: str) -> VelocityField:
    values, n, m, T = parse_csv(text)
    return VelocityField(TimeGrid(max(m, 1), T), SpaceGrid(n), values if m else np.vstack([values, values]))


def profile_from_csv(text: str):
    """Read a single-row field (e.g. an initial velocity) as ``(grid, values)``."""
    values, n, m, _ = parse_csv(text)
    if m != 0:
        raise ValidationError(f"expected a single profile (m=0), header says m={m}")
    return SpaceGrid(n), values[0]


def to_envelope(obj) -> dict:
    """JSON envelope ``{n, m, T, values}`` of a map, path or velocity field."""
    if isinstance(obj, MonotoneMap):
        return {"n": obj.grid.n, "m": 0, "T": 0.0, "values": obj.values.tolist()}
    if isinstance(obj, (PathGrid, VelocityField)):
        return {"n": obj.sgrid.n, "m": obj.tgrid.m, "T": obj.tgrid.T, "values": obj.values.tolist()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_envelope(data: dict, kind: str = "path"):
    n, m, T = int(data["n"]), int(data["m"]), float(data["T"])
    values = np.asarray(data["values"], dtype=float)
    if kind == "map":
        return MonotoneMap(SpaceGrid(n), values.reshape(-1))
    if kind == "path":
        return PathGrid(TimeGrid(m, T), SpaceGrid(n), values.reshape(m + 1, n + 1))
    if kind == "velocity":
        return VelocityField(TimeGrid(m, T), SpaceGrid(n), values.reshape(m + 1, n + 1))
    raise ValueError(f"unknown envelope kind {kind!r}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
