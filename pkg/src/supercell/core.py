"""Core data model: super cells, target schemas, positions, and labels.

A super cell is the atomic unit of source data: the keys shared by a group
of cells in one source tuple, plus the parallel attribute/value vectors of
that group. A target position addresses where a super cell's values land in
the target table (row key components, per-cell target attributes, and an
aggregation mode).

Key components are kept in source order on the cell but are always
*rendered and resolved* in canonical (lexicographic) order, so that two
decompositions of the same logical data — e.g. a table and its pivoted
form — produce identical feature sentences and identical COPY resolutions.

All types are immutable values and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, TextIO


class AggMode(Enum):
    """How multiple values mapped to one target cell are merged."""

    SUM = "sum"
    AVG = "avg"
    MIN = "min"
    MAX = "max"
    COUNT = "count"
    REPLACE = "replace"
    DISCARD = "discard"
    CONCAT = "concat"


AGG_MODES: tuple[AggMode, ...] = tuple(AggMode)

WILDCARD = "WILDCARD"
_COPY_RE = re.compile(r"^COPY\((\d+)\)$")


def copy_marker(index: int) -> str:
    """Key-label marker: copy of the cell's canonically ordered key component ``index``."""
    return f"COPY({index})"


def copy_index(entry: str | None) -> int | None:
    """The index inside a COPY marker, or None if ``entry`` is not one."""
    if entry is None:
        return None
    m = _COPY_RE.match(entry)
    return int(m[1]) if m else None


def is_wildcard(entry: str | None) -> bool:
    return entry == WILDCARD


class InvalidSuperCell(ValueError):
    pass


class InvalidPosition(ValueError):
    pass


class UnknownKeyValue(KeyError):
    """A literal key label is neither in the slot's domain nor a marker."""


@dataclass(frozen=True, slots=True)
class SuperCell:
    """A group of cells from one source tuple that always travel together."""

    source_id: str
    keys: tuple[str, ...]
    attributes: tuple[str, ...]
    values: tuple[str, ...]
    row_ordinal: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", tuple(self.keys))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.attributes) != len(self.values) or not self.attributes:
            raise InvalidSuperCell(
                f"attributes/values must be parallel and nonempty, got "
                f"{len(self.attributes)}/{len(self.values)}"
            )
        if self.row_ordinal < 0:
            raise InvalidSuperCell("row_ordinal must be >= 0")

    @property
    def width(self) -> int:
        return len(self.values)

    def sorted_keys(self) -> tuple[str, ...]:
        """Key components in canonical (lexicographic, case-folded) order."""
        return tuple(sorted(self.keys, key=lambda k: k.strip().lower()))

    def signature(self) -> tuple:
        """Identity modulo key order and provenance; used for multiset comparison."""
        return (self.source_id, self.sorted_keys(), self.attributes, self.values)

    def to_json(self) -> str:
        return json.dumps(
            {
                "source_id": self.source_id,
                "keys": list(self.keys),
                "attributes": list(self.attributes),
                "values": list(self.values),
                "row_ordinal": self.row_ordinal,
            },
            ensure_ascii=False,
        )

    @staticmethod
    def from_json(line: str) -> "SuperCell":
        obj = json.loads(line)
        return SuperCell(
            source_id=obj["source_id"],
            keys=tuple(obj["keys"]),
            attributes=tuple(obj["attributes"]),
            values=tuple(obj["values"]),
            row_ordinal=obj["row_ordinal"],
        )


def write_cells(cells: Iterable[SuperCell], fh: TextIO) -> int:
    n = 0
    for cell in cells:
        fh.write(cell.to_json() + "\n")
        n += 1
    return n


def read_cells(fh: TextIO) -> Iterator[SuperCell]:
    for line in fh:
        line = line.strip()
        if line:
            yield SuperCell.from_json(line)


@dataclass(frozen=True)
class KeyDomain:
    """Admissible canonical values for one target key attribute.

    An open domain also admits values produced by COPY resolution that were
    never listed (new dates, for example).
    """

    values: tuple[str, ...] = ()
    open: bool = False


@dataclass(frozen=True)
class TargetSchema:
    """Schema of the user-specified target table."""

    attributes: tuple[str, ...]
    key_attributes: tuple[str, ...]
    key_domains: dict[str, KeyDomain] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "key_attributes", tuple(self.key_attributes))
        missing = [k for k in self.key_attributes if k not in self.attributes]
        if missing:
            raise ValueError(f"key attributes not in attributes: {missing}")
        if not self.key_attributes:
            raise ValueError("at least one key attribute is required")

    @property
    def q(self) -> int:
        return len(self.key_attributes)

    @property
    def value_attributes(self) -> tuple[str, ...]:
        """Non-key attributes in schema order (the written cell columns)."""
        keyset = set(self.key_attributes)
        return tuple(a for a in self.attributes if a not in keyset)

    def domain(self, key_attr: str) -> KeyDomain:
        return self.key_domains.get(key_attr, KeyDomain(open=True))

    def to_dict(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "key_attributes": list(self.key_attributes),
            "key_domains": {
                k: {"values": list(d.values), "open": d.open}
                for k, d in self.key_domains.items()
            },
        }

    @staticmethod
    def from_dict(obj: dict) -> "TargetSchema":
        return TargetSchema(
            attributes=tuple(obj["attributes"]),
            key_attributes=tuple(obj["key_attributes"]),
            key_domains={
                k: KeyDomain(tuple(d.get("values", ())), bool(d.get("open", False)))
                for k, d in obj.get("key_domains", {}).items()
            },
        )


@dataclass(frozen=True, slots=True)
class TargetPosition:
    """A prediction label: where one super cell lands in the target table.

    ``keys`` has one entry per target key attribute: a literal canonical
    value, None (NULL), a COPY(i) marker, or WILDCARD (broadcast across all
    existing rows matching the other components). ``attributes`` parallels
    the super cell's values; None entries discard that cell. An all-None
    attribute vector denotes "discard the whole super cell" and requires
    all-None keys.
    """

    keys: tuple[str | None, ...]
    attributes: tuple[str | None, ...]
    agg_mode: AggMode

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", tuple(self.keys))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not self.attributes:
            raise InvalidPosition("attributes must be nonempty")
        if self.is_discard:
            if any(k is not None for k in self.keys):
                raise InvalidPosition("all-NULL attributes require all-NULL keys")
            object.__setattr__(self, "agg_mode", AggMode.DISCARD)

    @property
    def is_discard(self) -> bool:
        return all(a is None for a in self.attributes)

    def to_dict(self) -> dict:
        return {
            "keys": list(self.keys),
            "attributes": list(self.attributes),
            "agg_mode": self.agg_mode.value,
        }

    @staticmethod
    def from_dict(obj: dict) -> "TargetPosition":
        return TargetPosition(
            keys=tuple(obj["keys"]),
            attributes=tuple(obj["attributes"]),
            agg_mode=AggMode(obj["agg_mode"]),
        )


def discard_position(q: int, width: int) -> TargetPosition:
    return TargetPosition(
        keys=(None,) * q, attributes=(None,) * width, agg_mode=AggMode.DISCARD
    )


KEY, ATTR, VAL = "KEY", "ATTR", "VAL"


@dataclass(frozen=True, slots=True)
class FeatureSentence:
    """Tokenized rendering of a super cell, with per-token segment tags."""

    tokens: tuple[str, ...]
    segment_tags: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "segment_tags", tuple(self.segment_tags))
        if len(self.tokens) != len(self.segment_tags) or not self.tokens:
            raise ValueError("tokens and segment_tags must be parallel and nonempty")

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "segment_tags": list(self.segment_tags)}

    @staticmethod
    def from_dict(obj: dict) -> "FeatureSentence":
        return FeatureSentence(tuple(obj["tokens"]), tuple(obj["segment_tags"]))


def tokenize(text: str) -> list[str]:
    """Lower-case and split on whitespace; punctuation stays inside tokens."""
    return text.strip().lower().split()


def render_feature(cell: SuperCell) -> FeatureSentence:
    """Render a super cell as the sentence the classifier consumes.

    Keys come first in canonical order, then each cell's attribute name
    followed by its value. The result does not depend on the order columns
    appeared in the source file, nor on pivoting.
    """
    tokens: list[str] = []
    tags: list[str] = []
    for component in cell.sorted_keys():
        for tok in tokenize(component):
            tokens.append(tok)
            tags.append(KEY)
    for attr, value in zip(cell.attributes, cell.values):
        for tok in tokenize(attr):
            tokens.append(tok)
            tags.append(ATTR)
        for tok in tokenize(value):
            tokens.append(tok)
            tags.append(VAL)
    return FeatureSentence(tuple(tokens), tuple(tags))


NULL_CLASS = "\x00NULL"


@dataclass(frozen=True)
class LabelVector:
    """Per-head class indices for one labeled position."""

    key_ids: tuple[int, ...]
    attr_ids: tuple[int, ...]
    agg_id: int


class LabelSpace:
    """Classifier head vocabularies for a target schema.

    One head per target key attribute (domain values plus NULL, COPY(i) up
    to ``max_copy`` components, and WILDCARD), one head per cell slot up to
    ``max_width`` (target attributes plus NULL), and one aggregation head.
    """

    def __init__(self, schema: TargetSchema, max_copy: int = 6, max_width: int = 4):
        self.schema = schema
        self.max_copy = max_copy
        self.max_width = max_width
        self.key_vocabs: list[list[str | None]] = []
        for attr in schema.key_attributes:
            vocab: list[str | None] = [None]
            vocab.extend(copy_marker(i) for i in range(max_copy))
            vocab.append(WILDCARD)
            vocab.extend(sorted(schema.domain(attr).values))
            self.key_vocabs.append(vocab)
        self.attr_vocab: list[str | None] = [None] + list(schema.attributes)
        self._key_index = [
            {v: i for i, v in enumerate(vocab)} for vocab in self.key_vocabs
        ]
        self._attr_index = {v: i for i, v in enumerate(self.attr_vocab)}

    @property
    def head_sizes(self) -> list[int]:
        return (
            [len(v) for v in self.key_vocabs]
            + [len(self.attr_vocab)] * self.max_width
            + [len(AGG_MODES)]
        )

    def render(self, pos: TargetPosition) -> LabelVector:
        """Encode a position as per-head class indices.

        Raises UnknownKeyValue for a literal key outside the slot's domain
        and InvalidPosition for arity mismatches.
        """
        if len(pos.keys) != self.schema.q:
            raise InvalidPosition(
                f"position has {len(pos.keys)} keys, schema expects {self.schema.q}"
            )
        if len(pos.attributes) > self.max_width:
            raise InvalidPosition(
                f"cell width {len(pos.attributes)} exceeds max {self.max_width}"
            )
        key_ids = []
        for slot, entry in enumerate(pos.keys):
            idx = self._key_index[slot].get(entry)
            if idx is None:
                raise UnknownKeyValue(
                    f"key {entry!r} not admissible for "
                    f"{self.schema.key_attributes[slot]!r}"
                )
            key_ids.append(idx)
        attr_ids = []
        for entry in pos.attributes:
            if entry is not None and entry not in self._attr_index:
                raise InvalidPosition(f"unknown target attribute {entry!r}")
            attr_ids.append(self._attr_index[entry])
        return LabelVector(tuple(key_ids), tuple(attr_ids), AGG_MODES.index(pos.agg_mode))

    def decode(self, label: LabelVector) -> TargetPosition:
        keys = tuple(
            self.key_vocabs[slot][idx] for slot, idx in enumerate(label.key_ids)
        )
        attrs = tuple(self.attr_vocab[idx] for idx in label.attr_ids)
        agg = AGG_MODES[label.agg_id]
        if all(a is None for a in attrs):
            return discard_position(len(keys), len(attrs))
        return TargetPosition(keys, attrs, agg)


def render_label(pos: TargetPosition, schema: TargetSchema, **space_args) -> LabelVector:
    return LabelSpace(schema, **space_args).render(pos)


def decode_label(label: LabelVector, schema: TargetSchema, **space_args) -> TargetPosition:
    return LabelSpace(schema, **space_args).decode(label)
