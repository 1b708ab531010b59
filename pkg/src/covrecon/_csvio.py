"""Small CSV helpers shared by the export functions (17 significant digits)."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

FMT = "%.17g"


def format_header(meta: dict) -> str:
    return ", ".join(f"{k}={v}" for k, v in meta.items())


def parse_header(line: str) -> dict:
    line = line.lstrip("#").strip()
    out = {}
    for item in line.split(","):
        if "=" in item:
            k, v = item.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def matrix_to_text(a: np.ndarray, meta: dict | None = None) -> str:
    buf = io.StringIO()
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim == 1:
        a = a[None, :]
    header = format_header(meta) if meta else ""
    np.savetxt(buf, a, fmt=FMT, delimiter=",", header=header, comments="# ")
    return buf.getvalue()


def write_matrix(path, a: np.ndarray, meta: dict | None = None) -> None:
    Path(path).write_text(matrix_to_text(a, meta))


def read_matrix(path) -> tuple[np.ndarray, dict]:
    text = Path(path).read_text()
    meta = {}
    first = text.splitlines()[0] if text else ""
    if first.startswith("#"):
        meta = parse_header(first)
    a = np.loadtxt(io.StringIO(text), delimiter=",", comments="#", ndmin=2)
    return a, meta
