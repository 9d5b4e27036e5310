"""Domain schemas: immutable intent/slot declarations and the registry that
serves them to every other component.

Canonical schema document (UTF-8 JSON), field names bit-exact:

    {
      "service_name": "Weather",
      "intents": [
        {"name": "GetWeather", "is_transactional": false,
         "required_slots": ["city"], "optional_slots": ["date"]}
      ],
      "slots": [
        {"name": "city", "possible_values": [],
         "description": "...", "aliases": ["town"]}
      ]
    }

`description` and `aliases` are optional per slot; every other field is
required and unknown fields are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional

from .errors import AmbiguousIntent, MalformedDocument, SchemaViolation
from .textnorm import normalize_name

_INTENT_FIELDS = {"name", "is_transactional", "required_slots", "optional_slots"}
_SLOT_FIELDS = {"name", "possible_values", "description", "aliases"}
_TOP_FIELDS = {"service_name", "intents", "slots"}


@dataclass(frozen=True)
class SlotDef:
    name: str
    is_required_for: frozenset[str] = frozenset()
    possible_values: tuple[str, ...] = ()
    description: Optional[str] = None
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class IntentDef:
    name: str
    is_transactional: bool
    required_slots: tuple[str, ...] = ()
    optional_slots: tuple[str, ...] = ()

    def all_slots(self) -> tuple[str, ...]:
        return self.required_slots + self.optional_slots


@dataclass(frozen=True)
class DomainSchema:
    domain_name: str
    intents: tuple[IntentDef, ...]
    slots: tuple[SlotDef, ...]

    def find_slot(self, name: str) -> Optional[SlotDef]:
        wanted = normalize_name(name)
        for slot in self.slots:
            if normalize_name(slot.name) == wanted:
                return slot
        return None

    def find_intent(self, name: str) -> Optional[IntentDef]:
        wanted = normalize_name(name)
        for intent in self.intents:
            if normalize_name(intent.name) == wanted:
                return intent
        return None


@dataclass(frozen=True)
class SchemaRegistry:
    """Immutable domain_name -> DomainSchema mapping, safe to share across
    concurrent sessions."""

    domains: tuple[DomainSchema, ...]
    _by_name: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        by_name: dict[str, DomainSchema] = {}
        for schema in self.domains:
            key = normalize_name(schema.domain_name)
            if key in by_name:
                raise SchemaViolation(f"duplicate domain {schema.domain_name!r}")
            by_name[key] = schema
        object.__setattr__(self, "_by_name", by_name)

    def get(self, domain_name: str) -> Optional[DomainSchema]:
        return self._by_name.get(normalize_name(domain_name))

    def domain_names(self) -> tuple[str, ...]:
        return tuple(schema.domain_name for schema in self.domains)


def build_registry(schemas: Iterable[DomainSchema]) -> SchemaRegistry:
    return SchemaRegistry(tuple(schemas))


def _require(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise SchemaViolation(message, path)


def _string_list(value, path: str) -> tuple[str, ...]:
    _require(isinstance(value, list), "expected a list of strings", path)
    for i, item in enumerate(value):
        _require(isinstance(item, str), "expected a string", f"{path}[{i}]")
    return tuple(value)


def schema_from_document(doc: dict) -> DomainSchema:
    """Validate a parsed schema document and build the immutable schema."""
    _require(isinstance(doc, dict), "schema document must be an object", "")
    unknown = sorted(set(doc) - _TOP_FIELDS)
    _require(not unknown, f"unknown fields {unknown}", "")
    for name in _TOP_FIELDS:
        _require(name in doc, f"missing field {name!r}", "")

    domain_name = doc["service_name"]
    _require(isinstance(domain_name, str) and domain_name.strip() != "",
             "service_name must be a non-empty string", "service_name")

    raw_slots = doc["slots"]
    _require(isinstance(raw_slots, list), "slots must be a list", "slots")
    slot_required_for: dict[str, set[str]] = {}
    slot_docs: list[dict] = []
    seen_slot_names: dict[str, str] = {}
    for i, raw in enumerate(raw_slots):
        path = f"slots[{i}]"
        _require(isinstance(raw, dict), "slot must be an object", path)
        unknown = sorted(set(raw) - _SLOT_FIELDS)
        _require(not unknown, f"unknown fields {unknown}", path)
        _require("name" in raw and "possible_values" in raw,
                 "slot needs name and possible_values", path)
        name = raw["name"]
        _require(isinstance(name, str) and name.strip() != "",
                 "slot name must be a non-empty string", f"{path}.name")
        key = normalize_name(name)
        _require(key not in seen_slot_names,
                 f"duplicate slot name {name!r}", f"{path}.name")
        seen_slot_names[key] = name
        values = _string_list(raw["possible_values"], f"{path}.possible_values")
        folded = [v.casefold() for v in values]
        _require(len(set(folded)) == len(folded),
                 "possible_values contains duplicates", f"{path}.possible_values")
        description = raw.get("description")
        if description is not None:
            _require(isinstance(description, str), "description must be a string",
                     f"{path}.description")
        aliases = _string_list(raw.get("aliases", []), f"{path}.aliases")
        slot_docs.append({"name": name, "possible_values": values,
                          "description": description, "aliases": aliases})
        slot_required_for[key] = set()

    raw_intents = doc["intents"]
    _require(isinstance(raw_intents, list), "intents must be a list", "intents")
    _require(len(raw_intents) >= 1, "schema must declare at least one intent", "intents")
    intents: list[IntentDef] = []
    seen_intents: set[str] = set()
    for i, raw in enumerate(raw_intents):
        path = f"intents[{i}]"
        _require(isinstance(raw, dict), "intent must be an object", path)
        unknown = sorted(set(raw) - _INTENT_FIELDS)
        _require(not unknown, f"unknown fields {unknown}", path)
        for name in _INTENT_FIELDS:
            _require(name in raw, f"missing field {name!r}", path)
        name = raw["name"]
        _require(isinstance(name, str) and name.strip() != "",
                 "intent name must be a non-empty string", f"{path}.name")
        key = normalize_name(name)
        _require(key not in seen_intents, f"duplicate intent name {name!r}",
                 f"{path}.name")
        seen_intents.add(key)
        _require(isinstance(raw["is_transactional"], bool),
                 "is_transactional must be a boolean", f"{path}.is_transactional")
        required = _string_list(raw["required_slots"], f"{path}.required_slots")
        optional = _string_list(raw["optional_slots"], f"{path}.optional_slots")
        required_keys = {normalize_name(s) for s in required}
        optional_keys = {normalize_name(s) for s in optional}
        overlap = required_keys & optional_keys
        _require(not overlap,
                 f"slots {sorted(overlap)} are both required and optional", path)
        for slot_name in required + optional:
            _require(normalize_name(slot_name) in slot_required_for,
                     f"intent references unknown slot {slot_name!r}", path)
        for slot_name in required:
            slot_required_for[normalize_name(slot_name)].add(name)
        intents.append(IntentDef(name=name, is_transactional=raw["is_transactional"],
                                 required_slots=required, optional_slots=optional))

    slots = tuple(
        SlotDef(
            name=sd["name"],
            is_required_for=frozenset(slot_required_for[normalize_name(sd["name"])]),
            possible_values=sd["possible_values"],
            description=sd["description"],
            aliases=sd["aliases"],
        )
        for sd in slot_docs
    )
    return DomainSchema(domain_name=domain_name, intents=tuple(intents), slots=slots)


def load_schema(source: BinaryIO) -> DomainSchema:
    """Load and validate one schema document from a readable byte stream."""
    try:
        doc = json.loads(source.read().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocument(f"schema document is not valid JSON: {exc}") from exc
    return schema_from_document(doc)


def load_schema_file(path) -> DomainSchema:
    with open(path, "rb") as handle:
        return load_schema(handle)


def schema_to_document(schema: DomainSchema) -> dict:
    """Inverse of `schema_from_document`; loading the result round-trips."""
    slots = []
    for slot in schema.slots:
        doc: dict = {"name": slot.name, "possible_values": list(slot.possible_values)}
        if slot.description is not None:
            doc["description"] = slot.description
        if slot.aliases:
            doc["aliases"] = list(slot.aliases)
        slots.append(doc)
    return {
        "service_name": schema.domain_name,
        "intents": [
            {
                "name": intent.name,
                "is_transactional": intent.is_transactional,
                "required_slots": list(intent.required_slots),
                "optional_slots": list(intent.optional_slots),
            }
            for intent in schema.intents
        ],
        "slots": slots,
    }


def resolve_intent(registry: SchemaRegistry, method: str) -> Optional[tuple[str, IntentDef]]:
    """Find the unique intent whose normalized name equals the normalized
    method, or None. Raises AmbiguousIntent when two domains collide."""
    wanted = normalize_name(method)
    hits: list[tuple[str, IntentDef]] = []
    for schema in registry.domains:
        for intent in schema.intents:
            if normalize_name(intent.name) == wanted:
                hits.append((schema.domain_name, intent))
    if not hits:
        return None
    if len(hits) > 1:
        owners = ", ".join(domain for domain, _ in hits)
        raise AmbiguousIntent(f"intent {method!r} is defined by multiple domains: {owners}")
    return hits[0]
