"""Knowledge-base dump parsing: entities, properties, statements, value rendering,
and the on-disk entity index.

The dump is the standard public layout: one JSON object per line (with array
delimiter lines and trailing commas), fields ``id``, ``labels``, ``aliases``,
``claims`` (``mainsnak.datavalue``), ``sitelinks``. Only the documented subset
is read; qualifiers, ranks, and references are ignored.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Iterator

ENTITY_ID_RE = re.compile(r"^Q[0-9]+$")
PROPERTY_ID_RE = re.compile(r"^P[0-9]+$")
_TIME_RE = re.compile(r"^([+-])(\d+)-(\d{2})-(\d{2})T")

DEFAULT_LANGUAGE = "en"
DEFAULT_CATEGORY_PROPERTY = "P31"

INDEX_MAGIC = b"CMPKB1"

MONTH_NAMES = [
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
]


class RecordParseError(ValueError):
    """A dump line that is neither a valid record nor an array delimiter."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class UnrenderableValue(ValueError):
    """A value that cannot be turned into a surface form (e.g. unknown item id)."""


# ---------------------------------------------------------------------------
# Value variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ItemValue:
    """Tail value that is itself an entity."""

    id: str

    def __post_init__(self):
        if not ENTITY_ID_RE.match(self.id):
            raise ValueError(f"invalid entity id {self.id!r}")


@dataclass(frozen=True)
class StringValue:
    text: str


@dataclass(frozen=True)
class QuantityValue:
    amount: Decimal
    unit: str | None = None  # entity id of the unit, if any

    def __post_init__(self):
        if not self.amount.is_finite():
            raise ValueError("quantity amount must be finite")
        if self.unit is not None and not ENTITY_ID_RE.match(self.unit):
            raise ValueError(f"invalid unit id {self.unit!r}")


@dataclass(frozen=True)
class TimeValue:
    """Calendar date with a dump-style precision code (0-14; 9=year, 10=month, 11=day)."""

    year: int
    month: int
    day: int
    precision: int

    def __post_init__(self):
        if not 0 <= self.precision <= 14:
            raise ValueError(f"time precision {self.precision} out of range 0-14")


Value = ItemValue | StringValue | QuantityValue | TimeValue


@dataclass(frozen=True)
class Statement:
    """One knowledge-base fact: subject entity, property, value."""

    subject: str
    property: str
    value: Value


@dataclass
class Entity:
    id: str
    label: str
    aliases: set[str]
    sitelink: str | None = None
    instance_of: set[str] = field(default_factory=set)
    statements: list[Statement] = field(default_factory=list)


@dataclass
class Property:
    id: str
    label: str
    aliases: set[str]


@dataclass
class ParseCounters:
    """Tallies surfaced in the run manifest."""

    parsed_entities: int = 0
    parsed_properties: int = 0
    skipped_records: int = 0
    dropped_claims: int = 0
    parse_errors: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "parsed_entities": self.parsed_entities,
            "parsed_properties": self.parsed_properties,
            "skipped_records": self.skipped_records,
            "dropped_claims": self.dropped_claims,
            "parse_errors": self.parse_errors,
        }


@dataclass
class KnowledgeBase:
    entities: dict[str, Entity] = field(default_factory=dict)
    properties: dict[str, Property] = field(default_factory=dict)

    def entity_label(self, entity_id: str) -> str | None:
        ent = self.entities.get(entity_id)
        return ent.label if ent is not None else None

    def property_label(self, property_id: str) -> str | None:
        prop = self.properties.get(property_id)
        return prop.label if prop is not None else None

    def sitelink_owners(self) -> dict[str, str]:
        """Map article title -> owning entity id."""
        return {
            e.sitelink: e.id for e in self.entities.values() if e.sitelink is not None
        }

    def all_statements(self) -> Iterator[Statement]:
        for ent in self.entities.values():
            yield from ent.statements


# ---------------------------------------------------------------------------
# Claim parsing
# ---------------------------------------------------------------------------

def _parse_datavalue(datavalue: dict) -> Value | None:
    """Parse one mainsnak datavalue; None for unsupported kinds."""
    vtype = datavalue.get("type")
    payload = datavalue.get("value")
    if vtype == "wikibase-entityid" and isinstance(payload, dict):
        vid = payload.get("id")
        if vid is None and "numeric-id" in payload:
            vid = f"Q{payload['numeric-id']}"
        if isinstance(vid, str) and ENTITY_ID_RE.match(vid):
            return ItemValue(vid)
        return None
    if vtype == "string" and isinstance(payload, str):
        return StringValue(payload)
    if vtype == "quantity" and isinstance(payload, dict):
        try:
            amount = Decimal(payload["amount"])
        except (KeyError, InvalidOperation, TypeError):
            return None
        if not amount.is_finite():
            return None
        unit = payload.get("unit")
        unit_id: str | None = None
        if isinstance(unit, str) and unit not in ("", "1"):
            tail = unit.rsplit("/", 1)[-1]
            if ENTITY_ID_RE.match(tail):
                unit_id = tail
            else:
                return None
        return QuantityValue(amount, unit_id)
    if vtype == "time" and isinstance(payload, dict):
        raw = payload.get("time")
        precision = payload.get("precision")
        if not isinstance(raw, str) or not isinstance(precision, int):
            return None
        m = _TIME_RE.match(raw)
        if not m or not 0 <= precision <= 14:
            return None
        sign = -1 if m.group(1) == "-" else 1
        return TimeValue(
            year=sign * int(m.group(2)),
            month=int(m.group(3)),
            day=int(m.group(4)),
            precision=precision,
        )
    return None


def parse_statements(subject: str, claims: dict) -> tuple[list[Statement], int]:
    """Extract supported statements from a record's claims; returns (statements, dropped)."""
    statements: list[Statement] = []
    dropped = 0
    for property_id, claim_list in sorted(claims.items()):
        if not PROPERTY_ID_RE.match(property_id) or not isinstance(claim_list, list):
            dropped += len(claim_list) if isinstance(claim_list, list) else 1
            continue
        for claim in claim_list:
            mainsnak = claim.get("mainsnak", {}) if isinstance(claim, dict) else {}
            datavalue = mainsnak.get("datavalue")
            value = _parse_datavalue(datavalue) if isinstance(datavalue, dict) else None
            if value is None:
                dropped += 1
                continue
            statements.append(Statement(subject, property_id, value))
    return statements, dropped


def parse_entity_record(
    line: str,
    language: str = DEFAULT_LANGUAGE,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
    counters: ParseCounters | None = None,
    line_number: int | None = None,
) -> Entity | Property | None:
    """Parse one dump line into an Entity or Property.

    Returns None (skip) for array delimiter lines and for records without a
    label in the configured language. Raises RecordParseError for lines that
    do not parse as JSON at all.
    """
    counters = counters if counters is not None else ParseCounters()
    stripped = line.strip()
    if stripped in ("", "[", "]"):
        return None
    if stripped.endswith(","):
        stripped = stripped[:-1]
    try:
        record = json.loads(stripped)
    except json.JSONDecodeError as exc:
        raise RecordParseError(f"malformed dump record: {exc}", line_number) from exc
    if not isinstance(record, dict):
        raise RecordParseError("dump record is not an object", line_number)

    record_id = record.get("id", "")
    labels = record.get("labels") or {}
    label_entry = labels.get(language)
    label = label_entry.get("value") if isinstance(label_entry, dict) else None
    if not label:
        counters.skipped_records += 1
        return None

    alias_entries = (record.get("aliases") or {}).get(language) or []
    aliases = {label} | {
        a["value"] for a in alias_entries if isinstance(a, dict) and a.get("value")
    }

    if record.get("type") == "property" or PROPERTY_ID_RE.match(record_id):
        if not PROPERTY_ID_RE.match(record_id):
            counters.skipped_records += 1
            return None
        counters.parsed_properties += 1
        return Property(record_id, label, aliases)

    if not ENTITY_ID_RE.match(record_id):
        counters.skipped_records += 1
        return None

    statements, dropped = parse_statements(record_id, record.get("claims") or {})
    counters.dropped_claims += dropped

    sitelinks = record.get("sitelinks") or {}
    site_entry = sitelinks.get(f"{language}wiki")
    sitelink = site_entry.get("title") if isinstance(site_entry, dict) else None

    entity = Entity(
        id=record_id,
        label=label,
        aliases=aliases,
        sitelink=sitelink,
        statements=statements,
    )
    entity.instance_of = category_of(entity, category_property)
    counters.parsed_entities += 1
    return entity


def extract_statements(entity: Entity) -> list[Statement]:
    """All supported statements of an entity (unsupported claims were dropped at parse)."""
    return list(entity.statements)


def category_of(entity: Entity, category_property: str = DEFAULT_CATEGORY_PROPERTY) -> set[str]:
    """Item values of the configured category property (default: instance-of)."""
    return {
        s.value.id
        for s in entity.statements
        if s.property == category_property and isinstance(s.value, ItemValue)
    }


def read_dump(
    lines: Iterable[str],
    language: str = DEFAULT_LANGUAGE,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
) -> tuple[KnowledgeBase, ParseCounters]:
    """Stream a dump into a KnowledgeBase, counting skips and recoverable errors."""
    kb = KnowledgeBase()
    counters = ParseCounters()
    for line_number, line in enumerate(lines, start=1):
        try:
            record = parse_entity_record(
                line, language, category_property, counters, line_number
            )
        except RecordParseError:
            counters.parse_errors += 1
            continue
        if record is None:
            continue
        if isinstance(record, Property):
            kb.properties[record.id] = record
        else:
            kb.entities[record.id] = record
    return kb, counters


def read_dump_file(
    path: str | Path,
    language: str = DEFAULT_LANGUAGE,
    category_property: str = DEFAULT_CATEGORY_PROPERTY,
) -> tuple[KnowledgeBase, ParseCounters]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_dump(fh, language, category_property)


# ---------------------------------------------------------------------------
# Value rendering
# ---------------------------------------------------------------------------

def _format_amount(amount: Decimal) -> str:
    """Decimal without trailing zeros, plain notation."""
    normalized = amount.normalize()
    text = format(normalized, "f")
    return text


def render_value(value: Value, kb: KnowledgeBase) -> str:
    """Canonical surface form of a value for templates and alias matching.

    Item -> entity label; String -> as-is; Quantity -> decimal without
    trailing zeros plus unit label if present; Time -> "March 4, 1999" at day
    precision, "March 1999" at month, "1999" at year or coarser.
    """
    if isinstance(value, ItemValue):
        label = kb.entity_label(value.id)
        if label is None:
            raise UnrenderableValue(f"no label for item {value.id}")
        return label
    if isinstance(value, StringValue):
        return value.text
    if isinstance(value, QuantityValue):
        text = _format_amount(value.amount)
        if value.unit is not None:
            unit_label = kb.entity_label(value.unit)
            if unit_label is None:
                raise UnrenderableValue(f"no label for unit {value.unit}")
            text = f"{text} {unit_label}"
        return text
    if isinstance(value, TimeValue):
        if value.precision >= 11 and 1 <= value.month <= 12:
            return f"{MONTH_NAMES[value.month - 1]} {value.day}, {value.year}"
        if value.precision == 10 and 1 <= value.month <= 12:
            return f"{MONTH_NAMES[value.month - 1]} {value.year}"
        return str(value.year)
    raise UnrenderableValue(f"unsupported value {value!r}")


def value_to_json(value: Value) -> dict:
    if isinstance(value, ItemValue):
        return {"kind": "item", "id": value.id}
    if isinstance(value, StringValue):
        return {"kind": "string", "text": value.text}
    if isinstance(value, QuantityValue):
        return {"kind": "quantity", "amount": str(value.amount), "unit": value.unit}
    if isinstance(value, TimeValue):
        return {
            "kind": "time",
            "year": value.year,
            "month": value.month,
            "day": value.day,
            "precision": value.precision,
        }
    raise ValueError(f"unsupported value {value!r}")


def value_from_json(obj: dict) -> Value:
    kind = obj["kind"]
    if kind == "item":
        return ItemValue(obj["id"])
    if kind == "string":
        return StringValue(obj["text"])
    if kind == "quantity":
        return QuantityValue(Decimal(obj["amount"]), obj.get("unit"))
    if kind == "time":
        return TimeValue(obj["year"], obj["month"], obj["day"], obj["precision"])
    raise ValueError(f"unknown value kind {kind!r}")


def value_sort_key(value: Value) -> tuple:
    """Total, kb-independent order over values (for deterministic sorting)."""
    if isinstance(value, ItemValue):
        return ("item", value.id)
    if isinstance(value, StringValue):
        return ("string", value.text)
    if isinstance(value, QuantityValue):
        return ("quantity", str(value.amount), value.unit or "")
    if isinstance(value, TimeValue):
        return ("time", value.year, value.month, value.day, value.precision)
    raise ValueError(f"unsupported value {value!r}")


def statement_sort_key(stmt: Statement) -> tuple:
    return (stmt.subject, stmt.property) + value_sort_key(stmt.value)


# ---------------------------------------------------------------------------
# Binary entity index (versioned header, magic CMPKB1)
# ---------------------------------------------------------------------------

def _entity_to_json(entity: Entity) -> dict:
    return {
        "id": entity.id,
        "label": entity.label,
        "aliases": sorted(entity.aliases),
        "sitelink": entity.sitelink,
        "instance_of": sorted(entity.instance_of),
        "statements": [
            {"property": s.property, "value": value_to_json(s.value)}
            for s in entity.statements
        ],
    }


def _entity_from_json(obj: dict) -> Entity:
    return Entity(
        id=obj["id"],
        label=obj["label"],
        aliases=set(obj["aliases"]),
        sitelink=obj.get("sitelink"),
        instance_of=set(obj["instance_of"]),
        statements=[
            Statement(obj["id"], s["property"], value_from_json(s["value"]))
            for s in obj["statements"]
        ],
    )


def write_index(kb: KnowledgeBase, path: str | Path) -> None:
    """Serialize the KB to the binary index: magic, counts, length-prefixed blobs."""
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<QQ", len(kb.entities), len(kb.properties)))
        for entity_id in sorted(kb.entities):
            blob = json.dumps(
                _entity_to_json(kb.entities[entity_id]),
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            ).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
        for property_id in sorted(kb.properties):
            prop = kb.properties[property_id]
            blob = json.dumps(
                {"id": prop.id, "label": prop.label, "aliases": sorted(prop.aliases)},
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            ).encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)


def read_index(path: str | Path) -> KnowledgeBase:
    with open(path, "rb") as fh:
        magic = fh.read(len(INDEX_MAGIC))
        if magic != INDEX_MAGIC:
            raise ValueError(f"not a {INDEX_MAGIC.decode()} index: bad magic {magic!r}")
        n_entities, n_properties = struct.unpack("<QQ", fh.read(16))
        kb = KnowledgeBase()
        for _ in range(n_entities):
            (length,) = struct.unpack("<I", fh.read(4))
            entity = _entity_from_json(json.loads(fh.read(length).decode("utf-8")))
            kb.entities[entity.id] = entity
        for _ in range(n_properties):
            (length,) = struct.unpack("<I", fh.read(4))
            obj = json.loads(fh.read(length).decode("utf-8"))
            kb.properties[obj["id"]] = Property(
                obj["id"], obj["label"], set(obj["aliases"])
            )
        return kb
