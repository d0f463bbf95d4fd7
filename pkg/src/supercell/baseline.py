"""MinHash column-matching baseline: the comparison point for the learner.

Per-column MinHash signatures estimate Jaccard similarity between a source
column and each column of a user-provided target example; matched columns
drive a greedy minimal source selection and an exact equi-join on the
canonicalized key columns. The baseline stores L 32-bit minima per column,
so its storage grows with the total column count, and it has no answer for
a pivoted source whose key dimension lives in the headers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .canon import CanonKind, DictionaryStore, NONE, canonicalize
from .core import AggMode, TargetPosition, TargetSchema
from .assemble import TargetTable
from .ingest import RawTable, is_missing
from .learner import fnv1a64


class EmptyColumn(ValueError):
    pass


class IncompatibleSignatures(ValueError):
    pass


class UncoverableAttribute(ValueError):
    pass


@dataclass(frozen=True)
class MinHashSignature:
    """L per-hash minima over a column's 3-character shingle set."""

    values: tuple[int, ...]
    L: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.values) != self.L:
            raise IncompatibleSignatures(f"{len(self.values)} values for L={self.L}")


def shingles(value: str, size: int = 3) -> set[str]:
    text = value.strip().lower()
    if len(text) <= size:
        return {text} if text else set()
    return {text[i : i + size] for i in range(len(text) - size + 1)}


def column_shingles(column: list[str], size: int = 3) -> set[str]:
    out: set[str] = set()
    for value in column:
        if not is_missing(value):
            out |= shingles(value, size)
    return out


def _hash_matrix(shingle_list: list[str], L: int, seed: int) -> np.ndarray:
    """L seeded 64-bit hashes per shingle, truncated to 32 bits."""
    base = np.array([fnv1a64(s) for s in shingle_list], dtype=np.uint64)
    js = np.arange(L, dtype=np.uint64)
    mix = base[:, None] ^ (js[None, :] * np.uint64(0x9E3779B97F4A7C15))
    mix ^= np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    mix = (mix ^ (mix >> np.uint64(33))) * np.uint64(0xFF51AFD7ED558CCD)
    mix = (mix ^ (mix >> np.uint64(33))) * np.uint64(0xC4CEB9FE1A85EC53)
    mix ^= mix >> np.uint64(33)
    return (mix & np.uint64(0xFFFFFFFF)).astype(np.uint32)


def signature(column: list[str], L: int = 128, seed: int = 0) -> MinHashSignature:
    """MinHash signature of a column: position j holds the minimum of the
    j-th hash over the column's shingle set."""
    shingle_set = sorted(column_shingles(column))
    if not shingle_set:
        raise EmptyColumn("no shingles after dropping missing cells")
    matrix = _hash_matrix(shingle_set, L, seed)
    return MinHashSignature(tuple(int(v) for v in matrix.min(axis=0)), L, seed)


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of agreeing signature positions; unbiased for true Jaccard."""
    if a.L != b.L or a.seed != b.seed:
        raise IncompatibleSignatures("signatures use different L or seed family")
    agree = sum(1 for x, y in zip(a.values, b.values) if x == y)
    return agree / a.L


@dataclass(frozen=True)
class ColumnMatch:
    source_id: str
    column: str
    score: float


@dataclass
class MatchReport:
    """Column-matching outcome: global best per target attribute, the best
    per (attribute, source) for join-key lookup, and unmatched attributes."""

    best: dict[str, ColumnMatch]
    per_source: dict[tuple[str, str], ColumnMatch]
    unmatched: list[str]


def match_columns(
    sources: dict[str, RawTable],
    target_example: RawTable,
    threshold: float = 0.5,
    L: int = 128,
    seed: int = 0,
) -> MatchReport:
    """Best source column per target attribute, by estimated Jaccard.

    Sources are scanned in insertion order and columns in header order, so
    ties resolve deterministically. An unmatched attribute is recorded,
    not fatal.
    """
    source_sigs: list[tuple[str, str, MinHashSignature]] = []
    for source_id, table in sources.items():
        for column in table.header:
            try:
                source_sigs.append((source_id, column, signature(table.column(column), L, seed)))
            except EmptyColumn:
                continue
    best: dict[str, ColumnMatch] = {}
    per_source: dict[tuple[str, str], ColumnMatch] = {}
    unmatched: list[str] = []
    for attr in target_example.header:
        try:
            target_sig = signature(target_example.column(attr), L, seed)
        except EmptyColumn:
            unmatched.append(attr)
            continue
        for source_id, column, sig in source_sigs:
            score = estimate_jaccard(target_sig, sig)
            if score < threshold:
                continue
            key = (attr, source_id)
            if key not in per_source or score > per_source[key].score:
                per_source[key] = ColumnMatch(source_id, column, score)
            if attr not in best or score > best[attr].score:
                best[attr] = ColumnMatch(source_id, column, score)
        if attr not in best:
            unmatched.append(attr)
    return MatchReport(best, per_source, unmatched)


def select_sources(matches: dict[str, ColumnMatch]) -> list[str]:
    """Greedy set cover: fewest sources whose matched columns cover every
    matched target attribute. Ties go to the earlier source."""
    remaining = set(matches)
    covers: dict[str, set[str]] = {}
    order: list[str] = []
    for attr, match in matches.items():
        if match.source_id not in covers:
            covers[match.source_id] = set()
            order.append(match.source_id)
        covers[match.source_id].add(attr)
    selected: list[str] = []
    while remaining:
        best = max(order, key=lambda s: (len(covers[s] & remaining), -order.index(s)))
        gain = covers[best] & remaining
        if not gain:
            raise UncoverableAttribute(sorted(remaining))
        selected.append(best)
        remaining -= gain
    return selected


def baseline_integrate(
    report: MatchReport,
    sources: dict[str, RawTable],
    schema: TargetSchema,
    key_kinds: dict[str, CanonKind] | None = None,
    dictionaries: DictionaryStore | None = None,
) -> TargetTable:
    """Exact equi-join over the matched key columns, remaining matched
    columns projected; written through the shared table writer.

    Every selected source must have matched all target key attributes
    against its own columns, or the join key cannot be stated for its rows.
    """
    from .core import SuperCell

    missing_keys = [k for k in schema.key_attributes if k not in report.best]
    if missing_keys:
        raise UncoverableAttribute(missing_keys)
    key_kinds = key_kinds or {}
    selected = select_sources(report.best)
    table = TargetTable(schema)
    for source_id in selected:
        raw = sources[source_id]
        key_cols = {}
        for k in schema.key_attributes:
            match = report.per_source.get((k, source_id))
            if match is None:
                raise UncoverableAttribute(
                    f"source {source_id!r} has no column matching key {k!r}"
                )
            key_cols[k] = match.column
        value_attrs = [
            a
            for a in schema.attributes
            if a not in schema.key_attributes
            and a in report.best
            and report.best[a].source_id == source_id
        ]
        idx = {name: i for i, name in enumerate(raw.header)}
        for row in raw.rows:
            key = tuple(
                canonicalize(row[idx[key_cols[k]]], key_kinds.get(k, NONE), dictionaries)
                for k in schema.key_attributes
            )
            attrs = []
            values = []
            for attr in value_attrs:
                raw_value = row[idx[report.best[attr].column]]
                if is_missing(raw_value):
                    continue
                attrs.append(attr)
                values.append(raw_value)
            if not attrs:
                continue
            cell = SuperCell(source_id, key, tuple(attrs), tuple(values), 0)
            pos = TargetPosition(key, tuple(attrs), AggMode.REPLACE)
            table.apply(cell, pos)
    return table


def storage_report(n_columns: int, L: int) -> int:
    """Signature-store footprint in bytes: columns x L x 4-byte minima."""
    return n_columns * L * 4


def save_signatures(
    signatures: dict[tuple[str, str], MinHashSignature], path: str | Path
) -> None:
    """Binary store of little-endian 32-bit minima plus a JSON index."""
    path = Path(path)
    index = []
    with open(path, "wb") as fh:
        offset = 0
        for (source, column), sig in signatures.items():
            fh.write(struct.pack(f"<{sig.L}I", *sig.values))
            index.append(
                {"source": source, "column": column, "L": sig.L, "seed": sig.seed,
                 "offset": offset}
            )
            offset += sig.L * 4
    with open(path.with_suffix(path.suffix + ".index.json"), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=1)


def load_signatures(path: str | Path) -> dict[tuple[str, str], MinHashSignature]:
    path = Path(path)
    with open(path.with_suffix(path.suffix + ".index.json"), encoding="utf-8") as fh:
        index = json.load(fh)
    out: dict[tuple[str, str], MinHashSignature] = {}
    with open(path, "rb") as fh:
        blob = fh.read()
    for entry in index:
        L = entry["L"]
        values = struct.unpack_from(f"<{L}I", blob, entry["offset"])
        out[(entry["source"], entry["column"])] = MinHashSignature(values, L, entry["seed"])
    return out
