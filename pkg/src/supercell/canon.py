"""Value canonicalization: dates, numbers, and dictionary-backed synonyms.

Every value that enters a key comparison goes through ``canonicalize`` so
that surface-form changes in a source (date format cycles, region
abbreviations, thousands separators) collapse to a single canonical string.
Canonicalization is idempotent for every kind: applying it twice never
changes the result again.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path


class UnknownDictionary(KeyError):
    """A Dictionary(name) canonicalizer references a dictionary that is not loaded."""


@dataclass(frozen=True, slots=True)
class CanonKind:
    """How a column's values are normalized.

    ``kind`` is one of ``none``, ``date``, ``number``, ``dict``; the ``dict``
    kind carries the name of a loaded synonym dictionary.
    """

    kind: str = "none"
    dictionary: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "date", "number", "dict"):
            raise ValueError(f"unknown canon kind: {self.kind!r}")
        if self.kind == "dict" and not self.dictionary:
            raise ValueError("dict canon kind requires a dictionary name")

    @staticmethod
    def parse(text: str) -> "CanonKind":
        """Parse the JSON encoding: "none", "date", "number", or "dict:<name>"."""
        if text.startswith("dict:"):
            return CanonKind("dict", text.split(":", 1)[1])
        return CanonKind(text)

    def render(self) -> str:
        if self.kind == "dict":
            return f"dict:{self.dictionary}"
        return self.kind


NONE = CanonKind("none")
DATE = CanonKind("date")
NUMBER = CanonKind("number")


class SynonymDictionary:
    """Groups of interchangeable surface forms; the first entry of each group
    is the canonical head term.

    The on-disk form is a JSON array of arrays of strings.
    """

    def __init__(self, name: str, groups: list[list[str]]):
        self.name = name
        self.groups = [[str(t) for t in g] for g in groups if g]
        self._head: dict[str, str] = {}
        self._group_of: dict[str, list[str]] = {}
        for group in self.groups:
            head = group[0].strip().lower()
            for term in group:
                key = term.strip().lower()
                self._head[key] = head
                self._group_of[key] = group

    def head(self, value: str) -> str | None:
        """Canonical head for ``value`` (case-insensitive), or None if absent."""
        return self._head.get(value.strip().lower())

    def group(self, value: str) -> list[str] | None:
        return self._group_of.get(value.strip().lower())

    def siblings(self, value: str) -> list[str]:
        """Other members of the value's group, excluding the value itself."""
        group = self.group(value)
        if group is None:
            return []
        low = value.strip().lower()
        return [t for t in group if t.strip().lower() != low]

    @staticmethod
    def load(name: str, path: str | Path) -> "SynonymDictionary":
        with open(path, encoding="utf-8") as fh:
            return SynonymDictionary(name, json.load(fh))

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.groups, fh, ensure_ascii=False, indent=1)


DictionaryStore = dict[str, SynonymDictionary]


def load_dictionaries(paths: dict[str, str | Path]) -> DictionaryStore:
    return {name: SynonymDictionary.load(name, p) for name, p in paths.items()}


_MONTH_ABBR = ["Jan", "Feb", "Mar", "Apr", "May", "Jun",
               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
_MONTH_INDEX = {m.lower(): i + 1 for i, m in enumerate(_MONTH_ABBR)}

_RE_ISO = re.compile(r"^(\d{4})-(\d{2})-(\d{2})(?:[ T](\d{2}):(\d{2}):(\d{2}))?$")
_RE_MDY = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})(?:\s+(\d{1,2}):(\d{2}))?$")
_RE_COMPACT = re.compile(r"^(\d{2})(\d{2})(\d{4})$")
_RE_MONTH_NAME = re.compile(r"^([A-Za-z]{3,9})\.?\s+(\d{1,2}),?\s+(\d{4})$")


def _valid_ymd(y: int, m: int, d: int) -> bool:
    if not (1 <= m <= 12 and 1 <= d <= 31):
        return False
    days = [31, 29 if (y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)) else 28,
            31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
    return d <= days[m - 1]


def parse_date(value: str) -> tuple[int, int, int, int | None, int | None, int | None] | None:
    """Parse a date in any accepted input format; None if unrecognized.

    Accepted: ISO YYYY-MM-DD[ HH:MM:SS], M/D/YYYY[ H:MM], MMDDYYYY,
    and month-name forms like "Oct 6, 2020".
    """
    text = value.strip()
    m = _RE_ISO.match(text)
    if m:
        y, mo, d = int(m[1]), int(m[2]), int(m[3])
        if not _valid_ymd(y, mo, d):
            return None
        if m[4] is None:
            return (y, mo, d, None, None, None)
        hh, mi, ss = int(m[4]), int(m[5]), int(m[6])
        if hh > 23 or mi > 59 or ss > 59:
            return None
        return (y, mo, d, hh, mi, ss)
    m = _RE_MDY.match(text)
    if m:
        mo, d, y = int(m[1]), int(m[2]), int(m[3])
        if not _valid_ymd(y, mo, d):
            return None
        if m[4] is None:
            return (y, mo, d, None, None, None)
        hh, mi = int(m[4]), int(m[5])
        if hh > 23 or mi > 59:
            return None
        return (y, mo, d, hh, mi, 0)
    m = _RE_COMPACT.match(text)
    if m:
        mo, d, y = int(m[1]), int(m[2]), int(m[3])
        if not _valid_ymd(y, mo, d):
            return None
        return (y, mo, d, None, None, None)
    m = _RE_MONTH_NAME.match(text)
    if m:
        mo = _MONTH_INDEX.get(m[1].lower()[:3])
        d, y = int(m[2]), int(m[3])
        if mo is None or not _valid_ymd(y, mo, d):
            return None
        return (y, mo, d, None, None, None)
    return None


def iso_date(parts: tuple[int, int, int, int | None, int | None, int | None]) -> str:
    y, mo, d, hh, mi, ss = parts
    base = f"{y:04d}-{mo:02d}-{d:02d}"
    if hh is None:
        return base
    return f"{base} {hh:02d}:{mi:02d}:{ss:02d}"


def long_date(canonical: str) -> str:
    """Render a canonical ISO date as e.g. "Oct 6, 2020". Time parts dropped."""
    parts = parse_date(canonical)
    if parts is None:
        return canonical
    y, mo, d = parts[0], parts[1], parts[2]
    return f"{_MONTH_ABBR[mo - 1]} {d}, {y}"


def canonical_number(value: str) -> str | None:
    """Canonical decimal form, or None if the text is not numeric.

    Strips thousands separators and a trailing percent sign; trims trailing
    fractional zeros so "14.90" and "14.9" collapse to one form.
    """
    text = value.strip().replace(",", "")
    if text.endswith("%"):
        text = text[:-1].strip()
    if not text or not re.match(r"^[+-]?(\d+(\.\d*)?|\.\d+)$", text):
        return None
    try:
        dec = Decimal(text)
    except InvalidOperation:
        return None
    out = format(dec.normalize(), "f")
    return out


@dataclass
class CanonCounters:
    """Warning tallies for values that failed to parse and passed through."""

    unparseable_date: int = 0
    unparseable_number: int = 0

    def total(self) -> int:
        return self.unparseable_date + self.unparseable_number


def canonicalize(
    value: str,
    kind: CanonKind = NONE,
    dictionaries: DictionaryStore | None = None,
    counters: CanonCounters | None = None,
) -> str:
    """Normalize one value according to ``kind``.

    Unparseable dates and numbers pass through unchanged (a warning is
    counted when ``counters`` is given); this never raises on bad data.
    """
    if kind.kind == "date":
        parts = parse_date(value)
        if parts is None:
            if counters is not None:
                counters.unparseable_date += 1
            return value
        return iso_date(parts)
    if kind.kind == "number":
        out = canonical_number(value)
        if out is None:
            if counters is not None:
                counters.unparseable_number += 1
            return value
        return out
    if kind.kind == "dict":
        if dictionaries is None or kind.dictionary not in dictionaries:
            raise UnknownDictionary(kind.dictionary)
        head = dictionaries[kind.dictionary].head(value)
        if head is not None:
            return head
        return value.strip().lower()
    return value.strip().lower()
