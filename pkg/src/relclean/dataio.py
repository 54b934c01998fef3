"""Dataset ingestion: CSV loading, observed-value tables, derived columns."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .dsl.validate import Model
from .exprs import DERIVE_FUNCTIONS
from .values import KIND_STRING, parse_cell


class DataError(Exception):
    pass


@dataclass
class Dataset:
    columns: list[str]  # original columns, in header order
    rows: list[list]  # parsed cells, indexed by all_columns order
    all_columns: list[str] = field(default_factory=list)  # original + derived
    kinds: dict[str, str] = field(default_factory=dict)
    observed_sets: dict[str, tuple] = field(default_factory=dict)
    keyed_tables: dict[tuple[str, str], dict] = field(default_factory=dict)
    col_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.all_columns:
            self.all_columns = list(self.columns)
        if not self.col_index:
            self.col_index = {c: i for i, c in enumerate(self.all_columns)}

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def cell(self, row: int, column: str):
        return self.rows[row][self.col_index[column]]

    def observed_set(self, column: str) -> tuple:
        return self.observed_sets[column]

    def keyed_table(self, column: str, by: str) -> dict:
        return self.keyed_tables[(column, by)]


def _sort_key(v):
    return (type(v).__name__, str(v))


def build_dataset(
    columns: list[str],
    raw_rows: list[list],
    model: Model | None = None,
    kinds: dict[str, str] | None = None,
) -> Dataset:
    """Assemble a Dataset from raw text cells, applying the model's column
    kinds, derived columns, and observed-value tables."""
    kinds = dict(kinds or {})
    derive_specs = []
    keyed_specs = []
    if model is not None:
        for col, kind in model.column_kinds.items():
            kinds.setdefault(col, kind)
            if col not in columns and not any(
                p.kind == "derive" and p.name == col for p in model.program.preamble
            ):
                raise DataError(f"query column {col!r} missing from CSV header")
        for p in model.program.preamble:
            if p.kind == "derive":
                if p.derive_column not in columns:
                    raise DataError(
                        f"derived column source {p.derive_column!r} missing from header"
                    )
                derive_specs.append(p)
        keyed_specs = model.keyed_tables

    all_columns = list(columns)
    for p in derive_specs:
        if p.name in all_columns:
            raise DataError(f"derived column {p.name!r} collides with a CSV column")
        all_columns.append(p.name)

    width = len(columns)
    parsed_rows: list[list] = []
    for r, raw in enumerate(raw_rows):
        if len(raw) != width:
            raise DataError(f"row {r + 2}: expected {width} cells, found {len(raw)}")
        row = [
            parse_cell(raw[i], kinds.get(columns[i], KIND_STRING)) for i in range(width)
        ]
        for p in derive_specs:
            src = row[columns.index(p.derive_column)]
            fn = DERIVE_FUNCTIONS[p.derive_fn]
            row.append(fn(str(src)) if src is not None else None)
        parsed_rows.append(row)

    ds = Dataset(columns=list(columns), rows=parsed_rows, all_columns=all_columns, kinds=kinds)

    for i, col in enumerate(ds.all_columns):
        vals = {row[i] for row in parsed_rows if row[i] is not None}
        ds.observed_sets[col] = tuple(sorted(vals, key=_sort_key))

    for valcol, keycol in keyed_specs:
        vi, ki = ds.col_index[valcol], ds.col_index[keycol]
        table: dict = {}
        for row in parsed_rows:
            k, v = row[ki], row[vi]
            if k is None or v is None:
                continue
            table.setdefault(k, set()).add(v)
        ds.keyed_tables[(valcol, keycol)] = {
            k: tuple(sorted(vs, key=_sort_key)) for k, vs in table.items()
        }
    return ds


def load_csv(path: str | Path, model: Model | None = None, kinds=None) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw_rows = list(reader)
    return build_dataset(header, raw_rows, model=model, kinds=kinds)


def write_csv(path: str | Path, columns: list[str], rows: list[list]):
    from .values import render_value

    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(columns)
        for row in rows:
            w.writerow([render_value(c) for c in row])
