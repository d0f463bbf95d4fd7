"""Materializing predicted positions into the target table.

The table is a keyed accumulation structure: each cell carries its
aggregation mode and enough auxiliary state (running sum and count for
averages) to merge values in arrival order. Numeric modes use exact
``Decimal`` arithmetic so golden files are bit-stable.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .canon import canonical_number
from .core import (
    AggMode,
    SuperCell,
    TargetPosition,
    TargetSchema,
    copy_index,
    is_wildcard,
)

NUMERIC_MODES = {AggMode.SUM, AggMode.AVG, AggMode.MIN, AggMode.MAX}


class AggModeConflict(ValueError):
    """Two different aggregation modes were written to one cell."""


class IoFailure(OSError):
    pass


def _parse_decimal(value: str) -> Decimal | None:
    text = canonical_number(value)
    if text is None:
        return None
    try:
        return Decimal(text)
    except InvalidOperation:
        return None


def render_decimal(value: Decimal, max_frac_digits: int = 6) -> str:
    """Render with at most ``max_frac_digits`` fractional digits, trailing
    zeros trimmed; integral values render without a decimal point."""
    quantum = Decimal(1).scaleb(-max_frac_digits)
    quantized = value.quantize(quantum)
    text = format(quantized.normalize(), "f")
    return text


@dataclass
class CellState:
    """Aggregation state of one target cell."""

    mode: AggMode
    value: str = ""
    number: Decimal | None = None
    count: int = 0
    total: Decimal = Decimal(0)

    def merge(self, incoming: str) -> bool:
        """Fold one arriving value in; returns False on a numeric parse failure."""
        if self.mode in NUMERIC_MODES:
            num = _parse_decimal(incoming)
            if num is None:
                return False
            if self.mode is AggMode.SUM:
                self.number = num if self.number is None else self.number + num
            elif self.mode is AggMode.MIN:
                self.number = num if self.number is None else min(self.number, num)
            elif self.mode is AggMode.MAX:
                self.number = num if self.number is None else max(self.number, num)
            else:  # AVG
                self.total += num
                self.count += 1
            return True
        if self.mode is AggMode.COUNT:
            self.count += 1
            return True
        if self.mode is AggMode.REPLACE:
            self.value = incoming
            return True
        if self.mode is AggMode.DISCARD:
            if self.count == 0:
                self.value = incoming
            self.count += 1
            return True
        # CONCAT: append in arrival order.
        self.value = incoming if self.count == 0 else f"{self.value}|{incoming}"
        self.count += 1
        return True

    def finalize(self) -> str:
        if self.mode in (AggMode.SUM, AggMode.MIN, AggMode.MAX):
            return "" if self.number is None else render_decimal(self.number)
        if self.mode is AggMode.AVG:
            if self.count == 0:
                return ""
            return render_decimal(self.total / self.count)
        if self.mode is AggMode.COUNT:
            return str(self.count)
        return self.value


@dataclass
class AssemblyReport:
    build_ms: float = 0.0
    transform_ms: float = 0.0
    write_ms: float = 0.0
    cells_written: int = 0
    cells_skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "build_ms": self.build_ms,
            "transform_ms": self.transform_ms,
            "write_ms": self.write_ms,
            "cells_written": self.cells_written,
            "cells_skipped": self.cells_skipped,
        }


class TargetTable:
    """Keyed accumulation structure for assembled predictions.

    Rows are addressed by the full target-key tuple. A cell's aggregation
    mode is fixed by its first write; writing a different mode raises
    AggModeConflict. Wildcard key components broadcast to every existing
    row matching the concrete components and never create rows.
    """

    def __init__(self, schema: TargetSchema):
        self.schema = schema
        self.rows: dict[tuple[str, ...], dict[str, CellState]] = {}
        self.report = AssemblyReport()

    def apply(self, cell: SuperCell, pos: TargetPosition) -> None:
        """Write one super cell at its (already COPY-resolved) position."""
        started = time.perf_counter()
        try:
            if pos.is_discard:
                return
            if len(pos.keys) != self.schema.q:
                self.report.cells_skipped += len(pos.attributes)
                return
            if any(is_wildcard(k) for k in pos.keys):
                concrete = [
                    (i, k) for i, k in enumerate(pos.keys) if not is_wildcard(k)
                ]
                if any(k is None for _, k in concrete):
                    self.report.cells_skipped += len(pos.attributes)
                    return
                targets = [
                    key
                    for key in self.rows
                    if all(key[i] == k for i, k in concrete)
                ]
            else:
                if any(k is None or copy_index(k) is not None for k in pos.keys):
                    # Unresolved or unaddressable key; nothing sensible to write.
                    self.report.cells_skipped += len(pos.attributes)
                    return
                key = tuple(k for k in pos.keys)  # type: ignore[misc]
                if key not in self.rows:
                    self.rows[key] = {}
                targets = [key]
            for attr, value in zip(pos.attributes, cell.values):
                if attr is None:
                    continue
                for key in targets:
                    self._write(key, attr, value, pos.agg_mode)
        finally:
            self.report.build_ms += (time.perf_counter() - started) * 1000.0

    def _write(self, key: tuple[str, ...], attr: str, value: str, mode: AggMode) -> None:
        row = self.rows[key]
        state = row.get(attr)
        if state is None:
            state = CellState(mode=mode)
            row[attr] = state
        elif state.mode is not mode:
            raise AggModeConflict(
                f"cell ({key}, {attr!r}) written with {state.mode.value} then {mode.value}"
            )
        if state.merge(value):
            self.report.cells_written += 1
        else:
            self.report.cells_skipped += 1
            if state.count == 0 and state.number is None and not state.value:
                del row[attr]

    def finalized_rows(self) -> list[list[str]]:
        """Rows sorted by key tuple: key attributes first, then the remaining
        schema attributes in order, empty cells as empty strings."""
        value_attrs = [
            a for a in self.schema.attributes if a not in self.schema.key_attributes
        ]
        out: list[list[str]] = []
        for key in sorted(self.rows):
            row = self.rows[key]
            out.append(
                list(key) + [row[a].finalize() if a in row else "" for a in value_attrs]
            )
        return out

    def header(self) -> list[str]:
        value_attrs = [
            a for a in self.schema.attributes if a not in self.schema.key_attributes
        ]
        return list(self.schema.key_attributes) + value_attrs

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.finalized_rows())
        return buf.getvalue()

    def cells(self) -> dict[tuple[str, str], str]:
        """Finalized cell map {(key_tuple..., attr): value} for diffing."""
        out: dict[tuple, str] = {}
        value_attrs = [
            a for a in self.schema.attributes if a not in self.schema.key_attributes
        ]
        for key, row in self.rows.items():
            for attr in value_attrs:
                if attr in row:
                    out[key + (attr,)] = row[attr].finalize()
        return out


def finalize_and_write(
    table: TargetTable, path: str | Path
) -> tuple[Path, AssemblyReport]:
    """Write the finalized table as CSV and return the filled report."""
    started = time.perf_counter()
    header = table.header()
    rows = table.finalized_rows()
    table.report.transform_ms = (time.perf_counter() - started) * 1000.0

    started = time.perf_counter()
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    table.report.write_ms = (time.perf_counter() - started) * 1000.0
    return path, table.report


def write_report(report: AssemblyReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")


def diff_tables(expected: TargetTable, actual: TargetTable) -> dict:
    """Cell-level diff between two finalized tables.

    Cells are compared over the union of both tables' occupied positions;
    the fraction reported is agreement over the expected table's cells plus
    any spurious cells in the actual table.
    """
    exp = expected.cells()
    act = actual.cells()
    mismatched = sorted(
        k for k in (set(exp) | set(act)) if exp.get(k) != act.get(k)
    )
    total = len(set(exp) | set(act))
    return {
        "total_cells": total,
        "mismatched": len(mismatched),
        "agreement": 1.0 if total == 0 else 1.0 - len(mismatched) / total,
        "examples": [
            {"cell": list(k), "expected": exp.get(k), "actual": act.get(k)}
            for k in mismatched[:20]
        ],
    }
