"""Sweep tables and their plain-text export (CSV or gnuplot data plus script)."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class SweepResult:
    """One row per ``delta_h``; failed entries are NaN with the reason in ``errors``."""

    axis: np.ndarray
    columns: dict[str, np.ndarray]
    errors: tuple[str, ...]
    regimes: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.axis)
        if any(len(v) != n for v in self.columns.values()) or len(self.errors) != n:
            raise ValueError("every column needs one entry per axis point")
        if self.regimes and len(self.regimes) != n:
            raise ValueError("regimes need one entry per axis point")

    def row(self, i: int) -> dict[str, float]:
        return {k: float(v[i]) for k, v in self.columns.items()}


def write_table(path, names: Sequence[str], rows, header: Sequence[str] = ()) -> Path:
    """CSV with ``#`` header lines; floats written with ``repr`` for exact round trips."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_table(path) -> tuple[list[str], list[list[str]], list[str]]:
    """Inverse of :func:`write_table`: column names, raw rows and header lines."""
    header, body = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            header.append(line[1:].strip())
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    return rows[0], rows[1:], header


def _sweep_rows(result: SweepResult):
    names = ["delta_h", *result.columns]
    if result.regimes:
        names.append("regime")
    names.append("error")
    rows = []
    for i, x in enumerate(result.axis):
        row = [float(x), *(float(v[i]) for v in result.columns.values())]
        if result.regimes:
            row.append(result.regimes[i])
        row.append(result.errors[i])
        rows.append(row)
    return names, rows


def emit_plot_data(result: SweepResult, path, fmt: str = "csv",
                   header: Sequence[str] = ()) -> list[Path]:
    """Write ``result`` as ``<path>.csv`` or ``<path>.dat`` plus a ``<path>.gp`` stub."""
    if len(result.axis) == 0:
        raise ValueError("empty sweep result")
    base = Path(path)
    names, rows = _sweep_rows(result)
    header = [*header, *result.notes]
    if fmt == "csv":
        return [write_table(base.with_suffix(".csv"), names, rows, header)]
    if fmt != "gnuplot":
        raise ValueError(f"format must be 'csv' or 'gnuplot', got {fmt!r}")
    dat = base.with_suffix(".dat")
    numeric = ["delta_h", *result.columns]
    with dat.open("w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("# " + " ".join(f"{i + 1}:{n}" for i, n in enumerate(numeric)) + "\n")
        for i, x in enumerate(result.axis):
            vals = [float(x), *(float(v[i]) for v in result.columns.values())]
            fh.write(" ".join("NaN" if np.isnan(v) else repr(v) for v in vals) + "\n")
        for i, err in enumerate(result.errors):
            if err:
                fh.write(f"# error at delta_h={float(result.axis[i])!r}: {err}\n")
    plots = ", \\\n     ".join(
        f"'{dat.name}' using 1:{j + 2} with linespoints title '{name}'"
        for j, name in enumerate(result.columns)
    )
    gp = base.with_suffix(".gp")
    gp.write_text(
        "set datafile missing 'NaN'\n"
        "set xlabel 'delta_h'\n"
        "set key outside\n"
        "set terminal pngcairo size 900,600\n"
        f"set output '{base.name}.png'\n"
        f"plot {plots}\n",
        encoding="utf-8",
    )
    return [dat, gp]


def read_sweep_csv(path) -> SweepResult:
    names, rows, header = read_table(path)
    if names[0] != "delta_h" or names[-1] != "error":
        raise ValueError(f"not a sweep table: columns {names}")
    has_regime = names[-2] == "regime"
    value_names = names[1 : -2 if has_regime else -1]
    axis = np.array([float(r[0]) for r in rows])
    cols = {n: np.array([float(r[1 + j]) for r in rows]) for j, n in enumerate(value_names)}
    regimes = tuple(r[-2] for r in rows) if has_regime else ()
    return SweepResult(axis, cols, tuple(r[-1] for r in rows), regimes)


__all__ = ["SweepResult", "emit_plot_data", "read_sweep_csv", "read_table", "write_table"]
