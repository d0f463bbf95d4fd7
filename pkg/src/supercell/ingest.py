"""Parsing raw sources into super-cell streams.

Three source shapes are supported: plain CSV tables, pivoted CSV tables
(one key dimension spread across column headers), and line-oriented machine
logs described by regex rules. Decomposition is pure and deterministic:
identical bytes plus an identical descriptor always yield the same cells in
the same order.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

from .canon import CanonCounters, CanonKind, DictionaryStore, NONE, canonicalize
from .core import SuperCell

# Cell values treated as missing and skipped during decomposition.
_MISSING = {"", "na", "null"}


class MissingKeyColumn(ValueError):
    pass


class RaggedRow(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class NoRuleMatchedAnything(ValueError):
    pass


class DuplicateCellOnPivot(ValueError):
    pass


def is_missing(value: str) -> bool:
    return value.strip().lower() in _MISSING


@dataclass(frozen=True)
class RawTable:
    """An in-memory tabular source: header row plus string rows."""

    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "header", tuple(self.header))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))

    def column(self, name: str) -> list[str]:
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "RawTable":
        reader = csv.reader(io.StringIO(text))
        rows = [tuple(r) for r in reader]
        if not rows:
            raise EmptyInput("no header row")
        return RawTable(rows[0], tuple(rows[1:]))

    @staticmethod
    def read(path: str | Path) -> "RawTable":
        with open(path, encoding="utf-8", newline="") as fh:
            return RawTable.from_csv(fh.read())

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


@dataclass(frozen=True)
class LogRule:
    """One line pattern for log decomposition.

    ``key_captures`` maps key-column names to capture-group names; a match
    updates the ambient key state. ``attr_value_captures`` maps attribute
    names to capture-group names; a match emits one super cell carrying all
    captured attribute/value pairs under the current ambient keys.
    """

    pattern: str
    key_captures: dict[str, str] = field(default_factory=dict)
    attr_value_captures: dict[str, str] = field(default_factory=dict)

    def compiled(self) -> re.Pattern:
        return re.compile(self.pattern)

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "key_captures": dict(self.key_captures),
            "attr_value_captures": dict(self.attr_value_captures),
        }

    @staticmethod
    def from_dict(obj: dict) -> "LogRule":
        return LogRule(
            pattern=obj["pattern"],
            key_captures=dict(obj.get("key_captures", {})),
            attr_value_captures=dict(obj.get("attr_value_captures", {})),
        )


@dataclass(frozen=True)
class Pivot:
    pivot_axis_name: str
    value_attr_name: str


@dataclass(frozen=True)
class SourceDescriptor:
    """How one raw source decomposes into super cells."""

    source_id: str
    format: str = "csv"  # csv | pivoted_csv | log_lines
    key_columns: tuple[str, ...] = ()
    supercell_groups: tuple[tuple[str, ...], ...] = ()
    pivot: Pivot | None = None
    log_rules: tuple[LogRule, ...] = ()
    constant_keys: dict[str, str] = field(default_factory=dict)
    canonicalizers: dict[str, CanonKind] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "key_columns", tuple(self.key_columns))
        object.__setattr__(
            self, "supercell_groups", tuple(tuple(g) for g in self.supercell_groups)
        )
        object.__setattr__(self, "log_rules", tuple(self.log_rules))
        if self.format not in ("csv", "pivoted_csv", "log_lines"):
            raise ValueError(f"unknown source format {self.format!r}")
        if self.format == "pivoted_csv" and self.pivot is None:
            raise ValueError("pivoted_csv requires a pivot block")
        keyset = set(self.key_columns)
        seen: set[str] = set()
        for group in self.supercell_groups:
            for col in group:
                if col in keyset:
                    raise ValueError(f"column {col!r} is both key and grouped")
                if col in seen:
                    raise ValueError(f"column {col!r} appears in two groups")
                seen.add(col)

    def canon_kind(self, column: str) -> CanonKind:
        return self.canonicalizers.get(column, NONE)

    def to_dict(self) -> dict:
        out: dict = {
            "source_id": self.source_id,
            "format": self.format,
            "key_columns": list(self.key_columns),
            "supercell_groups": [list(g) for g in self.supercell_groups],
            "canonicalizers": {c: k.render() for c, k in self.canonicalizers.items()},
        }
        if self.pivot is not None:
            out["pivot"] = {
                "pivot_axis_name": self.pivot.pivot_axis_name,
                "value_attr_name": self.pivot.value_attr_name,
            }
        if self.log_rules:
            out["log_rules"] = [r.to_dict() for r in self.log_rules]
        if self.constant_keys:
            out["constant_keys"] = dict(self.constant_keys)
        return out

    @staticmethod
    def from_dict(obj: dict) -> "SourceDescriptor":
        pivot = None
        if "pivot" in obj and obj["pivot"]:
            pivot = Pivot(obj["pivot"]["pivot_axis_name"], obj["pivot"]["value_attr_name"])
        return SourceDescriptor(
            source_id=obj["source_id"],
            format=obj.get("format", "csv"),
            key_columns=tuple(obj.get("key_columns", ())),
            supercell_groups=tuple(tuple(g) for g in obj.get("supercell_groups", ())),
            pivot=pivot,
            log_rules=tuple(LogRule.from_dict(r) for r in obj.get("log_rules", ())),
            constant_keys=dict(obj.get("constant_keys", {})),
            canonicalizers={
                c: CanonKind.parse(k) for c, k in obj.get("canonicalizers", {}).items()
            },
        )


@dataclass
class DecomposeStats:
    rows: int = 0
    cells: int = 0
    skipped_missing_key_rows: int = 0
    skipped_empty_cells: int = 0
    unmatched_lines: int = 0
    canon: CanonCounters = field(default_factory=CanonCounters)


def _group_plan(
    header: tuple[str, ...], desc: SourceDescriptor
) -> list[tuple[str, ...]]:
    """Declared groups first, then singleton groups for remaining non-key columns."""
    keyset = set(desc.key_columns)
    grouped = {c for g in desc.supercell_groups for c in g}
    groups = [g for g in desc.supercell_groups]
    for col in header:
        if col not in keyset and col not in grouped:
            groups.append((col,))
    return groups


def decompose(
    table: RawTable,
    desc: SourceDescriptor,
    dictionaries: DictionaryStore | None = None,
    stats: DecomposeStats | None = None,
) -> list[SuperCell]:
    """Decompose a tabular source into one super cell per (row, group).

    Key values are canonicalized in descriptor order; for a pivoted table
    the pivot-axis value is appended as the last key component. Missing
    cells are skipped; rows missing a key value are skipped and counted.
    """
    stats = stats if stats is not None else DecomposeStats()
    if not table.rows:
        raise EmptyInput(f"source {desc.source_id!r} has no data rows")
    for row in table.rows:
        if len(row) != len(table.header):
            raise RaggedRow(
                f"row of width {len(row)} under header of width {len(table.header)}"
            )
    col_index = {name: i for i, name in enumerate(table.header)}
    for key_col in desc.key_columns:
        if key_col not in col_index:
            raise MissingKeyColumn(key_col)

    if desc.format == "pivoted_csv":
        return _decompose_pivoted(table, desc, col_index, dictionaries, stats)

    groups = _group_plan(table.header, desc)
    for group in groups:
        for col in group:
            if col not in col_index:
                raise MissingKeyColumn(f"grouped column {col!r} absent from header")

    cells: list[SuperCell] = []
    for ordinal, row in enumerate(table.rows):
        stats.rows += 1
        raw_keys = [row[col_index[c]] for c in desc.key_columns]
        if any(is_missing(v) for v in raw_keys):
            stats.skipped_missing_key_rows += 1
            continue
        keys = tuple(
            canonicalize(v, desc.canon_kind(c), dictionaries, stats.canon)
            for c, v in zip(desc.key_columns, raw_keys)
        )
        for group in groups:
            attrs: list[str] = []
            values: list[str] = []
            for col in group:
                raw = row[col_index[col]]
                if is_missing(raw):
                    stats.skipped_empty_cells += 1
                    continue
                attrs.append(canonicalize(col, NONE))
                values.append(canonicalize(raw, desc.canon_kind(col), dictionaries, stats.canon))
            if attrs:
                cells.append(SuperCell(desc.source_id, keys, tuple(attrs), tuple(values), ordinal))
                stats.cells += 1
    return cells


def _decompose_pivoted(
    table: RawTable,
    desc: SourceDescriptor,
    col_index: dict[str, int],
    dictionaries: DictionaryStore | None,
    stats: DecomposeStats,
) -> list[SuperCell]:
    assert desc.pivot is not None
    axis_kind = desc.canon_kind(desc.pivot.pivot_axis_name)
    value_kind = desc.canon_kind(desc.pivot.value_attr_name)
    attr = canonicalize(desc.pivot.value_attr_name, NONE)
    keyset = set(desc.key_columns)
    pivot_cols = [c for c in table.header if c not in keyset]

    cells: list[SuperCell] = []
    for ordinal, row in enumerate(table.rows):
        stats.rows += 1
        raw_keys = [row[col_index[c]] for c in desc.key_columns]
        if any(is_missing(v) for v in raw_keys):
            stats.skipped_missing_key_rows += 1
            continue
        base_keys = [
            canonicalize(v, desc.canon_kind(c), dictionaries, stats.canon)
            for c, v in zip(desc.key_columns, raw_keys)
        ]
        for col in pivot_cols:
            raw = row[col_index[col]]
            if is_missing(raw):
                stats.skipped_empty_cells += 1
                continue
            axis_value = canonicalize(col, axis_kind, dictionaries, stats.canon)
            keys = tuple(base_keys + [axis_value])
            value = canonicalize(raw, value_kind, dictionaries, stats.canon)
            cells.append(SuperCell(desc.source_id, keys, (attr,), (value,), ordinal))
            stats.cells += 1
    return cells


def decompose_log(
    lines,
    desc: SourceDescriptor,
    dictionaries: DictionaryStore | None = None,
    stats: DecomposeStats | None = None,
) -> list[SuperCell]:
    """Decompose a line stream using the descriptor's log rules.

    The first matching rule per line wins. Rules that capture keys update
    the ambient key state (host, timestamp, ...); rules that capture
    attribute/value pairs emit one super cell per match under the current
    ambient keys. Lines matched by no rule are counted and skipped.
    """
    if not desc.log_rules:
        raise ValueError(f"source {desc.source_id!r} has no log rules")
    stats = stats if stats is not None else DecomposeStats()
    compiled = [(rule, rule.compiled()) for rule in desc.log_rules]
    ambient: dict[str, str] = dict(desc.constant_keys)

    cells: list[SuperCell] = []
    for lineno, line in enumerate(lines):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        for rule, pattern in compiled:
            m = pattern.search(line)
            if m is None:
                continue
            for key_name, capture in rule.key_captures.items():
                ambient[key_name] = canonicalize(
                    m.group(capture), desc.canon_kind(key_name), dictionaries, stats.canon
                )
            if rule.attr_value_captures:
                missing_keys = [k for k in desc.key_columns if k not in ambient]
                if missing_keys:
                    raise MissingKeyColumn(
                        f"no ambient value for key(s) {missing_keys} at line {lineno}"
                    )
                keys = tuple(ambient[k] for k in desc.key_columns)
                attrs: list[str] = []
                values: list[str] = []
                for attr_name, capture in rule.attr_value_captures.items():
                    raw = m.group(capture)
                    if raw is None or is_missing(raw):
                        stats.skipped_empty_cells += 1
                        continue
                    attrs.append(canonicalize(attr_name, NONE))
                    values.append(
                        canonicalize(raw, desc.canon_kind(attr_name), dictionaries, stats.canon)
                    )
                if attrs:
                    cells.append(
                        SuperCell(desc.source_id, keys, tuple(attrs), tuple(values), lineno)
                    )
                    stats.cells += 1
            break
        else:
            stats.unmatched_lines += 1
    if not cells:
        raise NoRuleMatchedAnything(
            f"source {desc.source_id!r}: no rule produced any super cell"
        )
    return cells


def pivot_table(table: RawTable, key_columns: list[str], axis: str) -> RawTable:
    """Pivot a keyed table: values of the ``axis`` key column become headers.

    The table must have exactly one non-key value column; raises
    DuplicateCellOnPivot if two rows collide in the pivoted grid.
    """
    if axis not in key_columns:
        raise ValueError(f"axis {axis!r} must be one of the key columns")
    value_cols = [c for c in table.header if c not in key_columns]
    if len(value_cols) != 1:
        raise ValueError(
            f"pivot requires exactly one value column, found {value_cols}"
        )
    value_col = value_cols[0]
    other_keys = [c for c in key_columns if c != axis]
    idx = {name: i for i, name in enumerate(table.header)}

    axis_values: list[str] = []
    seen_axis: set[str] = set()
    grid: dict[tuple[str, ...], dict[str, str]] = {}
    row_order: list[tuple[str, ...]] = []
    for row in table.rows:
        axis_value = row[idx[axis]]
        if axis_value not in seen_axis:
            seen_axis.add(axis_value)
            axis_values.append(axis_value)
        rest = tuple(row[idx[c]] for c in other_keys)
        if rest not in grid:
            grid[rest] = {}
            row_order.append(rest)
        if axis_value in grid[rest]:
            raise DuplicateCellOnPivot(f"duplicate cell at {rest} x {axis_value!r}")
        grid[rest][axis_value] = row[idx[value_col]]

    header = tuple(other_keys) + tuple(axis_values)
    rows = tuple(
        rest + tuple(grid[rest].get(v, "") for v in axis_values) for rest in row_order
    )
    return RawTable(header, rows)
