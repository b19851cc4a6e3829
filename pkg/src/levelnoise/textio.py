"""Plain-text persistence shared by spectra, unfolded levels and reports.

Series files carry ``# key=value`` header lines followed by one value per
line. Floats are written with ``repr`` so they round-trip exactly, which is
what makes reruns byte-identical.
"""
from pathlib import Path

import numpy as np


def format_float(x):
    return repr(float(x))


def format_value(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (tuple, list)):
        return ",".join(format_value(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def header_lines(meta):
    lines = []
    for key, value in meta.items():
        text = format_value(value)
        if "\n" in text:
            raise ValueError(f"metadata value for {key!r} spans lines")
        lines.append(f"# {key}={text}\n")
    return lines


def parse_header_line(line):
    body = line[1:].strip()
    if "=" not in body:
        return None
    key, _, value = body.partition("=")
    return key.strip(), value.strip()


def write_series(path, values, meta=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.writelines(header_lines(meta or {}))
        for v in values:
            fh.write(format_float(v) + "\n")
    return path


def read_series(path):
    """Return ``(values, meta)`` from a header + one-value-per-line file."""
    meta = {}
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                kv = parse_header_line(stripped)
                if kv is not None:
                    meta[kv[0]] = kv[1]
                continue
            try:
                values.append(float(stripped))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {stripped!r}") from None
    return np.asarray(values, dtype=float), meta


def write_table(path, columns, rows, meta=None):
    """Write comma-delimited rows under a provenance header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.writelines(header_lines(meta or {}))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join("" if x is None else format_value(x) for x in row) + "\n")
    return path


def read_table(path):
    """Return ``(columns, rows, meta)``; empty cells become ``None``."""
    meta = {}
    columns = None
    rows = []
    with open(path) as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                kv = parse_header_line(stripped)
                if kv is not None:
                    meta[kv[0]] = kv[1]
                continue
            cells = stripped.split(",")
            if columns is None:
                columns = cells
                continue
            row = []
            for c in cells:
                if c == "":
                    row.append(None)
                else:
                    try:
                        row.append(float(c))
                    except ValueError:
                        row.append(c)
            rows.append(row)
    return columns or [], rows, meta


def write_keyvalue(path, items):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key}={format_value(value)}\n")
    return path


def read_keyvalue(path):
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            out[key.strip()] = value.strip()
    return out
