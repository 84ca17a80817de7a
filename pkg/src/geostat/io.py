"""CSV datasets and flat ``key = value`` text files.

Floats are written with ``repr`` (shortest string that round-trips), so a
read/write cycle is lossless and the bytes depend only on the values.  Every
file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, DomainError
from .fields import Dataset, Design, Kind

KEY_COLUMNS = {
    Kind.SPATIAL: ("x", "y"),
    Kind.SPACETIME: ("x", "y", "t"),
    Kind.BIVARIATE: ("x", "y", "var"),
}


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _key_strings(design: Design) -> list[list[str]]:
    cols = [[repr(v) for v in design.coords[:, 0].tolist()], [repr(v) for v in design.coords[:, 1].tolist()]]
    if design.kind is Kind.SPACETIME:
        cols.append([repr(v) for v in design.t.tolist()])
    elif design.kind is Kind.BIVARIATE:
        cols.append([str(v) for v in design.var.tolist()])
    return cols


def table_text(design: Design, extra: dict[str, np.ndarray] | None = None) -> str:
    """Key columns for ``design`` followed by named float columns."""
    extra = extra or {}
    header = list(KEY_COLUMNS[design.kind]) + list(extra)
    cols = _key_strings(design)
    for name, values in extra.items():
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape[0] != len(design):
            raise DimensionMismatch(f"column {name!r} has {values.shape[0]} rows, design has {len(design)}")
        cols.append([repr(v) for v in values.tolist()])
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in zip(*cols))
    return "\n".join(lines) + "\n"


def write_dataset(path, data: Dataset) -> None:
    atomic_write(path, table_text(data.design, {"z": data.values}))


def write_targets(path, design: Design) -> None:
    atomic_write(path, table_text(design))


def write_predictions(path, design: Design, mean, variance) -> None:
    atomic_write(path, table_text(design, {"zhat": mean, "kvar": variance}))


def read_table(path) -> tuple[Design, dict[str, np.ndarray]]:
    """Parse a CSV written by this module; the kind is inferred from the header."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if header[:2] != ["x", "y"]:
        raise DomainError(f"{path}: header must start with x,y")
    if len(header) > 2 and header[2] == "t":
        kind = Kind.SPACETIME
    elif len(header) > 2 and header[2] == "var":
        kind = Kind.BIVARIATE
    else:
        kind = Kind.SPATIAL
    if any(len(r) != len(header) for r in rows):
        raise DimensionMismatch(f"{path}: ragged rows")
    try:
        table = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    except ValueError as e:
        raise DomainError(f"{path}: {e}") from None
    nkey = len(KEY_COLUMNS[kind])
    design = Design(
        kind,
        table[:, :2],
        t=table[:, 2] if kind is Kind.SPACETIME else None,
        var=table[:, 2].astype(np.int64) if kind is Kind.BIVARIATE else None,
    )
    return design, {name: table[:, nkey + i] for i, name in enumerate(header[nkey:])}


def read_dataset(path, metadata: dict | None = None) -> Dataset:
    design, cols = read_table(path)
    if "z" not in cols:
        raise DomainError(f"{path}: no z column")
    if metadata is None:
        meta_path = sidecar(path)
        metadata = read_kv(meta_path) if meta_path.exists() else {}
    return Dataset(design, cols["z"], metadata)


def sidecar(path) -> Path:
    return Path(str(path) + ".meta")


# -- key = value ------------------------------------------------------------------


def kv_text(items: dict) -> str:
    out = []
    for k, v in items.items():
        if isinstance(v, float):
            v = repr(v)
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


def write_kv(path, items: dict) -> None:
    atomic_write(path, kv_text(items))


def parse_kv(text: str, source: str = "<text>") -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise DomainError(f"{source}:{lineno}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_kv(fh.read(), str(path))
