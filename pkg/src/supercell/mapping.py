"""Declarative integration specs, the deterministic oracle, and label generation.

A mapping spec captures exactly the information a hand-written integration
script encodes: how each source's key components line up with the target
key, how source attributes map to target attributes (or are discarded), and
how colliding values aggregate. The same spec drives two independent paths:
``oracle_integrate`` executes it directly (the ground truth for every
end-to-end test), and ``generate_training_data`` turns it into labeled
samples for the learner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .assemble import TargetTable
from .canon import CanonKind, DictionaryStore, NONE, canonicalize, long_date
from .core import (
    AggMode,
    FeatureSentence,
    SuperCell,
    TargetPosition,
    TargetSchema,
    WILDCARD,
    copy_index,
    copy_marker,
    discard_position,
    render_feature,
)
from .ingest import SourceDescriptor

DISCARD = "DISCARD"


class SpecViolation(ValueError):
    pass


class KeyResolutionFailure(ValueError):
    pass


_RENDERERS = {
    "long_date": long_date,
    "title": lambda v: v.title(),
}


@dataclass(frozen=True)
class KeyMapEntry:
    """Aligns one target key attribute with a source key component.

    A wildcard entry means the source has no component for this attribute
    and its writes broadcast across all matching rows (the 1-N join case).
    ``render`` optionally reformats the canonical value on the target side
    (e.g. "2020-10-06" -> "Oct 6, 2020"); rendered values are labeled
    literally rather than as COPY markers.
    """

    target: str
    component: int | None = None
    kind: CanonKind = NONE
    render: str | None = None
    wildcard: bool = False

    def __post_init__(self) -> None:
        if self.wildcard and self.component is not None:
            raise SpecViolation(f"entry for {self.target!r} is wildcard and mapped")
        if not self.wildcard and self.component is None:
            raise SpecViolation(f"entry for {self.target!r} needs a component or wildcard")
        if self.render is not None and self.render not in _RENDERERS:
            raise SpecViolation(f"unknown render {self.render!r}")

    def to_dict(self) -> dict:
        out: dict = {"target": self.target}
        if self.wildcard:
            out["wildcard"] = True
        else:
            out["component"] = self.component
            out["kind"] = self.kind.render()
        if self.render:
            out["render"] = self.render
        return out

    @staticmethod
    def from_dict(obj: dict) -> "KeyMapEntry":
        return KeyMapEntry(
            target=obj["target"],
            component=obj.get("component"),
            kind=CanonKind.parse(obj.get("kind", "none")),
            render=obj.get("render"),
            wildcard=bool(obj.get("wildcard", False)),
        )


@dataclass(frozen=True)
class KeyHierarchy:
    """Parent/child rollup used by key-expansion perturbations.

    ``children`` maps a parent key value (of target key attribute
    ``key_attr``) to its child names; values of expanded rows aggregate back
    to the parent cell with ``rollup``.
    """

    key_attr: str
    children: dict[str, tuple[str, ...]]
    rollup: AggMode = AggMode.SUM

    def to_dict(self) -> dict:
        return {
            "key_attr": self.key_attr,
            "children": {k: list(v) for k, v in self.children.items()},
            "rollup": self.rollup.value,
        }

    @staticmethod
    def from_dict(obj: dict) -> "KeyHierarchy":
        return KeyHierarchy(
            key_attr=obj["key_attr"],
            children={k: tuple(v) for k, v in obj["children"].items()},
            rollup=AggMode(obj.get("rollup", "sum")),
        )


@dataclass
class MappingSpec:
    """One integration task: target schema, sources, and their alignments."""

    target: TargetSchema
    sources: list[SourceDescriptor]
    key_map: dict[str, list[KeyMapEntry]]
    attr_map: dict[str, dict[str, str]]
    agg_map: dict[str, dict[str, AggMode]] = field(default_factory=dict)
    key_hierarchy: KeyHierarchy | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        attrs = set(self.target.attributes)
        for source_id, amap in self.attr_map.items():
            for src_attr, tgt in amap.items():
                if tgt != DISCARD and tgt not in attrs:
                    raise SpecViolation(
                        f"{source_id}: {src_attr!r} maps to unknown attribute {tgt!r}"
                    )
        for source_id, amap in self.agg_map.items():
            unknown = set(amap) - set(self.attr_map.get(source_id, {}))
            if unknown:
                raise SpecViolation(
                    f"{source_id}: agg_map covers unmapped attributes {sorted(unknown)}"
                )
        for desc in self.sources:
            if not self._is_relevant(desc.source_id):
                continue
            entries = {e.target: e for e in self.key_map.get(desc.source_id, ())}
            missing = [k for k in self.target.key_attributes if k not in entries]
            if missing:
                raise SpecViolation(
                    f"{desc.source_id}: target key attributes {missing} uncovered"
                )
        # Per-slot canonicalization must agree across sources so that COPY
        # resolution is a single function of the target slot.
        for attr in self.target.key_attributes:
            kinds = {
                e.kind
                for entries in self.key_map.values()
                for e in entries
                if e.target == attr and not e.wildcard
            }
            if len(kinds) > 1:
                raise SpecViolation(f"conflicting canon kinds for key {attr!r}")

    def _is_relevant(self, source_id: str) -> bool:
        amap = self.attr_map.get(source_id, {})
        return any(t != DISCARD for t in amap.values())

    def descriptor(self, source_id: str) -> SourceDescriptor:
        for desc in self.sources:
            if desc.source_id == source_id:
                return desc
        raise SpecViolation(f"unknown source {source_id!r}")

    def key_kinds(self) -> dict[str, CanonKind]:
        """Canonicalization kind per target key attribute (for COPY resolution)."""
        out: dict[str, CanonKind] = {}
        for attr in self.target.key_attributes:
            out[attr] = NONE
            for entries in self.key_map.values():
                for e in entries:
                    if e.target == attr and not e.wildcard:
                        out[attr] = e.kind
        return out

    def parent_components(self) -> dict[str, int]:
        """Per source, the key component the hierarchy's expandable attribute
        maps from (where key-expansion perturbations insert children)."""
        if self.key_hierarchy is None:
            return {}
        out: dict[str, int] = {}
        for source_id, entries in self.key_map.items():
            for e in entries:
                if e.target == self.key_hierarchy.key_attr and not e.wildcard:
                    out[source_id] = e.component
        return out

    def to_dict(self) -> dict:
        out: dict = {
            "target": self.target.to_dict(),
            "sources": [d.to_dict() for d in self.sources],
            "key_map": {
                s: [e.to_dict() for e in entries] for s, entries in self.key_map.items()
            },
            "attr_map": self.attr_map,
            "agg_map": {
                s: {a: m.value for a, m in amap.items()}
                for s, amap in self.agg_map.items()
            },
        }
        if self.key_hierarchy is not None:
            out["key_hierarchy"] = self.key_hierarchy.to_dict()
        return out

    @staticmethod
    def from_dict(obj: dict) -> "MappingSpec":
        return MappingSpec(
            target=TargetSchema.from_dict(obj["target"]),
            sources=[SourceDescriptor.from_dict(d) for d in obj["sources"]],
            key_map={
                s: [KeyMapEntry.from_dict(e) for e in entries]
                for s, entries in obj.get("key_map", {}).items()
            },
            attr_map={s: dict(a) for s, a in obj.get("attr_map", {}).items()},
            agg_map={
                s: {a: AggMode(m) for a, m in amap.items()}
                for s, amap in obj.get("agg_map", {}).items()
            },
            key_hierarchy=(
                KeyHierarchy.from_dict(obj["key_hierarchy"])
                if obj.get("key_hierarchy")
                else None
            ),
        )

    @staticmethod
    def load(path: str | Path) -> "MappingSpec":
        with open(path, encoding="utf-8") as fh:
            return MappingSpec.from_dict(json.load(fh))

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=1)
            fh.write("\n")


@dataclass(frozen=True)
class LabeledSample:
    """One training or evaluation example: feature, label, and provenance."""

    feature: FeatureSentence
    label: TargetPosition
    origin: tuple[str, int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "feature": self.feature.to_dict(),
                "label": self.label.to_dict(),
                "origin": {"source_id": self.origin[0], "row_ordinal": self.origin[1]},
            },
            ensure_ascii=False,
        )

    @staticmethod
    def from_json(line: str) -> "LabeledSample":
        obj = json.loads(line)
        return LabeledSample(
            feature=FeatureSentence.from_dict(obj["feature"]),
            label=TargetPosition.from_dict(obj["label"]),
            origin=(obj["origin"]["source_id"], obj["origin"]["row_ordinal"]),
        )


def _is_expanded(cell: SuperCell, desc: SourceDescriptor, spec: MappingSpec) -> bool:
    base = len(desc.key_columns)
    if desc.format == "pivoted_csv":
        base += 1
    return spec.key_hierarchy is not None and len(cell.keys) > base


def _target_key_values(
    cell: SuperCell,
    entries: list[KeyMapEntry],
    spec: MappingSpec,
    dictionaries: DictionaryStore | None,
) -> tuple[list[str | None], list[KeyMapEntry | None]]:
    """Concrete target key values in schema order (WILDCARD where declared)."""
    by_target = {e.target: e for e in entries}
    values: list[str | None] = []
    used: list[KeyMapEntry | None] = []
    for attr in spec.target.key_attributes:
        entry = by_target.get(attr)
        if entry is None:
            raise KeyResolutionFailure(
                f"{cell.source_id}: no key_map entry for target key {attr!r}"
            )
        if entry.wildcard:
            values.append(WILDCARD)
            used.append(entry)
            continue
        if entry.component >= len(cell.keys):
            raise KeyResolutionFailure(
                f"{cell.source_id}: component {entry.component} out of range "
                f"for {len(cell.keys)} key components"
            )
        value = canonicalize(cell.keys[entry.component], entry.kind, dictionaries)
        if entry.render:
            value = _RENDERERS[entry.render](value)
        values.append(value)
        used.append(entry)
    return values, used


def position_for_cell(
    spec: MappingSpec,
    cell: SuperCell,
    dictionaries: DictionaryStore | None = None,
    as_label: bool = False,
) -> TargetPosition:
    """The cell's target position under the spec.

    With ``as_label`` the key entries prefer COPY(i) markers (indices into
    the cell's canonically ordered key components) wherever the concrete
    target value equals the canonicalized component; otherwise concrete
    values are returned, ready for assembly.
    """
    desc = spec.descriptor(cell.source_id)
    amap = spec.attr_map.get(cell.source_id, {})
    attrs: list[str | None] = []
    for attr in cell.attributes:
        target = amap.get(attr, DISCARD)
        attrs.append(None if target == DISCARD else target)
    if all(a is None for a in attrs):
        return discard_position(spec.target.q, cell.width)

    if _is_expanded(cell, desc, spec):
        agg = spec.key_hierarchy.rollup
    else:
        agg_map = spec.agg_map.get(cell.source_id, {})
        modes = {
            agg_map.get(src_attr, AggMode.REPLACE)
            for src_attr, tgt in zip(cell.attributes, attrs)
            if tgt is not None
        }
        if len(modes) > 1:
            raise SpecViolation(
                f"{cell.source_id}: one super cell mixes aggregation modes {modes}"
            )
        agg = modes.pop()

    entries = spec.key_map.get(cell.source_id, [])
    values, used = _target_key_values(cell, entries, spec, dictionaries)
    if not as_label:
        return TargetPosition(tuple(values), tuple(attrs), agg)

    sorted_keys = list(cell.sorted_keys())
    kinds = spec.key_kinds()
    keys: list[str | None] = []
    for slot, (value, entry) in enumerate(zip(values, used)):
        if value == WILDCARD:
            keys.append(WILDCARD)
            continue
        slot_kind = kinds[spec.target.key_attributes[slot]]
        component_value = cell.keys[entry.component]
        sorted_i = sorted_keys.index(component_value)
        resolved = canonicalize(component_value, slot_kind, dictionaries)
        if resolved == value:
            keys.append(copy_marker(sorted_i))
        else:
            keys.append(value)
    return TargetPosition(tuple(keys), tuple(attrs), agg)


def resolve_position(
    pos: TargetPosition,
    cell: SuperCell,
    key_kinds: list[CanonKind],
    dictionaries: DictionaryStore | None = None,
) -> tuple[TargetPosition, int]:
    """Resolve COPY markers against the cell's canonically ordered keys.

    Returns the concrete position plus the number of COPY components that
    were out of range and degraded to NULL.
    """
    if pos.is_discard:
        return pos, 0
    sorted_keys = cell.sorted_keys()
    out: list[str | None] = []
    degraded = 0
    for slot, entry in enumerate(pos.keys):
        idx = copy_index(entry)
        if idx is None:
            out.append(entry)
            continue
        if idx >= len(sorted_keys):
            out.append(None)
            degraded += 1
            continue
        out.append(canonicalize(sorted_keys[idx], key_kinds[slot], dictionaries))
    return TargetPosition(tuple(out), pos.attributes, pos.agg_mode), degraded


def oracle_integrate(
    spec: MappingSpec,
    corpora: dict[str, list[SuperCell]],
    dictionaries: DictionaryStore | None = None,
) -> TargetTable:
    """Integrate by executing the spec directly; the ground truth for all
    end-to-end tests. Sources are applied in spec order, cells in corpus
    order, so arrival-order aggregation modes behave identically to the
    learned pipeline."""
    table = TargetTable(spec.target)
    for desc in spec.sources:
        for cell in corpora.get(desc.source_id, ()):
            pos = position_for_cell(spec, cell, dictionaries, as_label=False)
            table.apply(cell, pos)
    return table


def generate_training_data(
    spec: MappingSpec,
    corpora: dict[str, list[SuperCell]],
    dictionaries: DictionaryStore | None = None,
) -> list[LabeledSample]:
    """One labeled sample per source super cell, in deterministic order."""
    samples: list[LabeledSample] = []
    for desc in spec.sources:
        for cell in corpora.get(desc.source_id, ()):
            label = position_for_cell(spec, cell, dictionaries, as_label=True)
            samples.append(
                LabeledSample(
                    feature=render_feature(cell),
                    label=label,
                    origin=(cell.source_id, cell.row_ordinal),
                )
            )
    return samples


def assemble_labels(
    spec: MappingSpec,
    corpora: dict[str, list[SuperCell]],
    labels_by_source: dict[str, list[TargetPosition]],
    dictionaries: DictionaryStore | None = None,
) -> TargetTable:
    """Assemble (cell, label) pairs into a table, resolving COPY markers."""
    kinds_by_attr = spec.key_kinds()
    kinds = [kinds_by_attr[a] for a in spec.target.key_attributes]
    table = TargetTable(spec.target)
    for desc in spec.sources:
        cells = corpora.get(desc.source_id, ())
        labels = labels_by_source.get(desc.source_id, ())
        if len(cells) != len(labels):
            raise SpecViolation(
                f"{desc.source_id}: {len(cells)} cells vs {len(labels)} labels"
            )
        for cell, label in zip(cells, labels):
            pos, _ = resolve_position(label, cell, kinds, dictionaries)
            table.apply(cell, pos)
    return table


def consistency_check(
    spec: MappingSpec,
    corpora: dict[str, list[SuperCell]],
    dictionaries: DictionaryStore | None = None,
) -> dict:
    """Verify that assembling generated labels reproduces the oracle exactly.

    Returns a cell-level diff report; an empty diff means the label
    representation loses nothing the oracle knows.
    """
    from .assemble import diff_tables

    samples = generate_training_data(spec, corpora, dictionaries)
    labels_by_source: dict[str, list[TargetPosition]] = {}
    index = 0
    for desc in spec.sources:
        n = len(corpora.get(desc.source_id, ()))
        labels_by_source[desc.source_id] = [s.label for s in samples[index : index + n]]
        index += n
    rebuilt = assemble_labels(spec, corpora, labels_by_source, dictionaries)
    oracle = oracle_integrate(spec, corpora, dictionaries)
    return diff_tables(oracle, rebuilt)
