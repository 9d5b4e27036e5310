"""Dataset converters: turn SGD-style directories and BiTOD-style files into
the canonical corpus (schemas, user goals, gold calls, gold requests, replay
search results).

SGD input: a directory holding schema.json plus dialogues_*.json files in the
schema-guided dialog format (per-turn frames with optional service_call /
service_results on system turns and REQUEST actions on user turns).

BiTOD input: one JSON file mapping dialogue_id to {"Events": [...]} where
events carry Agent User/Wizard/KnowledgeBase, user actions with
(act, slot, relation, value), and KnowledgeBase events holding the queried
API name, the constraint set, and the returned item. Only English dialogs
are retained.

Unmappable records are skipped and counted, never fatal.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .calls import ApiCall, ParamTriple, canonicalize
from .errors import MalformedDocument
from .schema import DomainSchema, schema_from_document
from .simulator import UserGoal
from .textnorm import normalize_name
from .corpus import CorpusItem

_CJK = re.compile(r"[一-鿿㐀-䶿]")

_RELATION_MAP = {
    "equal_to": "equal_to",
    "at_least": "at_least",
    "at_most": "at_most",
    "less_than": "at_most",  # closest supported tag
    "one_of": "one_of",
    "not": "not",
}


@dataclass
class ConversionResult:
    schemas: list[DomainSchema]
    items: list[CorpusItem]
    skipped: list[str] = field(default_factory=list)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)


def _note(result: ConversionResult, source: str, message: str) -> None:
    result.skipped.append(f"{source}: {message}")


# ---------------------------------------------------------------------------
# SGD

def _sgd_schema_to_canonical(service: dict) -> dict:
    intents = []
    for intent in service.get("intents", []):
        optional = intent.get("optional_slots", {})
        optional_names = list(optional) if isinstance(optional, dict) \
            else list(optional)
        intents.append({
            "name": intent["name"],
            "is_transactional": bool(intent.get("is_transactional", False)),
            "required_slots": list(intent.get("required_slots", [])),
            "optional_slots": optional_names,
        })
    slots = [{"name": slot["name"],
              "possible_values": [str(v) for v in slot.get("possible_values", [])]}
             for slot in service.get("slots", [])]
    listed = {normalize_name(s["name"]) for s in slots}
    for intent in intents:
        for name in intent["required_slots"] + intent["optional_slots"]:
            if normalize_name(name) not in listed:
                slots.append({"name": name, "possible_values": []})
                listed.add(normalize_name(name))
    return {"service_name": service["service_name"], "intents": intents,
            "slots": slots}


def _call_from_parameters(method: str, parameters: dict) -> ApiCall:
    params = tuple(ParamTriple(name=str(name), operator="equal_to",
                               value=str(value))
                   for name, value in parameters.items())
    return canonicalize(ApiCall(method=method, params=params))


def _sgd_dialog_to_item(dialog: dict, source: str,
                        result: ConversionResult) -> Optional[CorpusItem]:
    dialog_id = dialog.get("dialogue_id") or dialog.get("dialog_id")
    if not dialog_id:
        _note(result, source, "dialog without an id")
        return None
    services = dialog.get("services", [])
    gold_calls: list[ApiCall] = []
    call_turn_indices: list[int] = []
    call_services: list[str] = []
    replay_results: dict = {}
    occurrences: dict[str, int] = {}
    requests_raw: list[tuple[str, str, int]] = []  # (slot, service, turn idx)

    for turn_index, turn in enumerate(dialog.get("turns", [])):
        speaker = turn.get("speaker", "")
        for frame in turn.get("frames", []):
            service = frame.get("service", "")
            if speaker == "SYSTEM" and frame.get("service_call"):
                service_call = frame["service_call"]
                method = service_call.get("method")
                parameters = service_call.get("parameters", {})
                if not method or not isinstance(parameters, dict):
                    _note(result, f"{source}:{dialog_id}",
                          f"turn {turn_index}: unmappable service_call")
                    continue
                call = _call_from_parameters(method, parameters)
                gold_calls.append(call)
                call_turn_indices.append(turn_index)
                call_services.append(service)
                occurrence = occurrences.get(normalize_name(method), 0)
                occurrences[normalize_name(method)] = occurrence + 1
                rows = frame.get("service_results", [])
                replay_results[(method, occurrence)] = [
                    {str(k): v for k, v in row.items()} for row in rows]
            if speaker == "USER":
                for action in frame.get("actions", []):
                    if action.get("act") == "REQUEST" and action.get("slot"):
                        requests_raw.append((action["slot"], service, turn_index))

    if not gold_calls:
        _note(result, f"{source}:{dialog_id}", "no service calls; skipped")
        return None

    def find_value(slot: str, service: str, turn_index: int) -> Optional[str]:
        best: Optional[str] = None
        for call, call_turn, call_service in zip(gold_calls, call_turn_indices,
                                                 call_services):
            if service and call_service and \
                    normalize_name(call_service) != normalize_name(service):
                continue
            for (method, occurrence), rows in replay_results.items():
                if normalize_name(method) != normalize_name(call.method):
                    continue
                for row in rows[:1]:
                    for key, value in row.items():
                        if normalize_name(key) == normalize_name(slot):
                            if call_turn <= turn_index or best is None:
                                best = str(value)
        return best

    gold_requests: list[tuple[str, str, int]] = []
    request_slot_map: dict[int, list[str]] = {}
    for slot, service, turn_index in requests_raw:
        value = find_value(slot, service, turn_index)
        if value is None:
            _note(result, f"{source}:{dialog_id}",
                  f"request {slot!r} has no value in any result row; skipped")
            continue
        gold_requests.append((slot, value, turn_index))
        goal_index = 0
        for position, call_turn in enumerate(call_turn_indices):
            if call_turn <= turn_index:
                goal_index = position
        request_slot_map.setdefault(goal_index, []).append(slot)

    goal = UserGoal(
        goal_calls=tuple(gold_calls),
        request_slots={index: tuple(slots)
                       for index, slots in request_slot_map.items()})
    domains = []
    for service in services:
        if service not in domains:
            domains.append(service)
    return CorpusItem(
        dialog_id=dialog_id, domains=tuple(domains), goal=goal,
        gold_calls=tuple(gold_calls), gold_requests=tuple(gold_requests),
        replay_results=replay_results,
        domain_class="multi" if len(services) > 1 else "single")


def _item_passes_invariants(item: CorpusItem, registry,
                            result: ConversionResult, source: str) -> bool:
    from .validator import validate

    for call in item.gold_calls:
        verdict = validate(call, registry)
        if not verdict.ok:
            kinds = [e.kind for e in verdict.errors]
            _note(result, source,
                  f"{item.dialog_id}: gold call {call.method!r} fails "
                  f"validation ({kinds}); item kept, call flagged")
    rows_text = json.dumps([rows for rows in item.replay_results.values()],
                           ensure_ascii=False)
    for slot, value, _ in item.gold_requests:
        if value not in rows_text:
            _note(result, source,
                  f"{item.dialog_id}: request value {value!r} missing from "
                  "result rows")
            return False
    return True


def convert_sgd(raw_dir) -> ConversionResult:
    """Convert an SGD-format directory (schema.json + dialogues_*.json)."""
    from .schema import build_registry

    raw_dir = Path(raw_dir)
    schema_path = raw_dir / "schema.json"
    if not schema_path.exists():
        raise MalformedDocument(f"{raw_dir}: no schema.json")
    with open(schema_path, "r", encoding="utf-8") as handle:
        services = json.load(handle)
    result = ConversionResult(schemas=[], items=[])
    for service in services:
        try:
            result.schemas.append(
                schema_from_document(_sgd_schema_to_canonical(service)))
        except Exception as exc:  # keep converting other services
            _note(result, str(schema_path),
                  f"service {service.get('service_name')!r}: {exc}")
    registry = build_registry(result.schemas)
    for dialog_file in sorted(raw_dir.glob("dialogues_*.json")):
        with open(dialog_file, "r", encoding="utf-8") as handle:
            dialogs = json.load(handle)
        for dialog in dialogs:
            item = _sgd_dialog_to_item(dialog, dialog_file.name, result)
            if item is not None and \
                    _item_passes_invariants(item, registry, result,
                                            dialog_file.name):
                result.items.append(item)
    return result


# ---------------------------------------------------------------------------
# BiTOD

def _is_english(dialog_id: str, events: list) -> bool:
    if "zh" in dialog_id.lower().split("_") or dialog_id.lower().startswith("zh"):
        return False
    for event in events:
        utterance = event.get("Text") or event.get("utterance") or ""
        if _CJK.search(str(utterance)):
            return False
    return True


def _bitod_value(relation: str, value) -> tuple[str, object]:
    operator = _RELATION_MAP.get(relation)
    if operator is None:
        raise KeyError(relation)
    if isinstance(value, list):
        items = tuple(str(v) for v in value)
        if operator == "one_of" and len(items) > 1:
            return operator, items
        return operator, items[0] if items else ""
    return operator, str(value)


def _bitod_constraints_to_params(constraints) -> list[ParamTriple]:
    params: list[ParamTriple] = []
    if isinstance(constraints, dict):
        for slot, spec in constraints.items():
            if isinstance(spec, dict) and spec:
                relation, value = next(iter(spec.items()))
            else:
                relation, value = "equal_to", spec
            operator, converted = _bitod_value(relation, value)
            params.append(ParamTriple(name=str(slot), operator=operator,
                                      value=converted))
    elif isinstance(constraints, list):
        for entry in constraints:
            operator, converted = _bitod_value(entry.get("relation", "equal_to"),
                                               entry.get("value"))
            params.append(ParamTriple(name=str(entry["slot"]), operator=operator,
                                      value=converted))
    return params


def convert_bitod(raw_file) -> ConversionResult:
    """Convert a BiTOD-format JSON file, keeping only English dialogs."""
    raw_file = Path(raw_file)
    with open(raw_file, "r", encoding="utf-8") as handle:
        dialogs = json.load(handle)
    result = ConversionResult(schemas=[], items=[])
    schema_slots: dict[str, dict[str, set]] = {}
    schema_intents: dict[str, set] = {}

    for dialog_id, payload in sorted(dialogs.items()):
        events = payload.get("Events", [])
        if not _is_english(dialog_id, events):
            _note(result, f"{raw_file.name}:{dialog_id}",
                  "non-English dialog; filtered")
            continue
        active_intent = ""
        gold_calls: list[ApiCall] = []
        replay_results: dict = {}
        occurrences: dict[str, int] = {}
        requests_raw: list[tuple[str, int]] = []
        domains: list[str] = []
        for event_index, event in enumerate(events):
            agent = event.get("Agent", "")
            if agent == "User":
                intent = event.get("active_intent") or active_intent
                active_intent = intent
                for action in event.get("Actions", []):
                    if action.get("act") == "request" and action.get("slot"):
                        requests_raw.append((action["slot"], event_index))
            elif agent == "KnowledgeBase":
                method = event.get("API") or active_intent
                if not method:
                    _note(result, f"{raw_file.name}:{dialog_id}",
                          f"event {event_index}: query without an API name")
                    continue
                try:
                    params = _bitod_constraints_to_params(
                        event.get("Constraints", {}))
                except KeyError as exc:
                    _note(result, f"{raw_file.name}:{dialog_id}",
                          f"event {event_index}: unknown relation {exc}")
                    continue
                call = canonicalize(ApiCall(method=str(method),
                                            params=tuple(params)))
                gold_calls.append(call)
                occurrence = occurrences.get(normalize_name(call.method), 0)
                occurrences[normalize_name(call.method)] = occurrence + 1
                item_row = event.get("Item") or {}
                rows = [item_row] if item_row else []
                replay_results[(call.method, occurrence)] = [
                    {str(k): v for k, v in row.items()} for row in rows]
                domain = str(method).split("_")[0]
                if domain and domain not in domains:
                    domains.append(domain)
                intent_key = domain or "bitod"
                schema_intents.setdefault(intent_key, set()).add(str(method))
                slot_bag = schema_slots.setdefault(intent_key, {})
                for triple in call.params:
                    slot_bag.setdefault(triple.name, set())
        if not gold_calls:
            _note(result, f"{raw_file.name}:{dialog_id}", "no API queries; skipped")
            continue

        row_text = json.dumps([rows for rows in replay_results.values()],
                              ensure_ascii=False)
        gold_requests: list[tuple[str, str, int]] = []
        request_slot_map: dict[int, list[str]] = {}
        for slot, event_index in requests_raw:
            value: Optional[str] = None
            for rows in replay_results.values():
                for row in rows:
                    for key, cell in row.items():
                        if normalize_name(key) == normalize_name(slot):
                            value = str(cell)
                            break
            if value is None or value not in row_text:
                _note(result, f"{raw_file.name}:{dialog_id}",
                      f"request {slot!r} has no value in results; skipped")
                continue
            gold_requests.append((slot, value, event_index))
            request_slot_map.setdefault(max(len(gold_calls) - 1, 0), []).append(slot)

        goal = UserGoal(goal_calls=tuple(gold_calls),
                        request_slots={index: tuple(slots)
                                       for index, slots in request_slot_map.items()})
        item = CorpusItem(
            dialog_id=dialog_id, domains=tuple(domains), goal=goal,
            gold_calls=tuple(gold_calls), gold_requests=tuple(gold_requests),
            replay_results=replay_results,
            domain_class="multi" if len(domains) > 1 else "single")
        result.items.append(item)

    for domain, intents in sorted(schema_intents.items()):
        slots = sorted(schema_slots.get(domain, {}))
        doc = {
            "service_name": domain,
            "intents": [{"name": intent, "is_transactional": False,
                         "required_slots": [], "optional_slots": slots}
                        for intent in sorted(intents)],
            "slots": [{"name": slot, "possible_values": []} for slot in slots],
        }
        result.schemas.append(schema_from_document(doc))
    return result


def write_corpus(result: ConversionResult, out_dir) -> None:
    """Materialize a conversion as a canonical corpus directory."""
    from .calls import serialize
    from .simulator import goal_to_document

    out_dir = Path(out_dir)
    for schema in result.schemas:
        from .schema import schema_to_document
        path = out_dir / "schemas" / f"{schema.domain_name}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(schema_to_document(schema), indent=2,
                                   ensure_ascii=False) + "\n", encoding="utf-8")
    for item in result.items:
        goal_path = out_dir / "goals" / f"{item.dialog_id}.json"
        goal_path.parent.mkdir(parents=True, exist_ok=True)
        goal_path.write_text(json.dumps(goal_to_document(item.goal), indent=2,
                                        ensure_ascii=False) + "\n",
                             encoding="utf-8")
        gold_path = out_dir / "gold" / f"{item.dialog_id}.jsonl"
        gold_path.parent.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps({"kind": "call", "call": serialize(call)},
                            ensure_ascii=False) for call in item.gold_calls]
        lines += [json.dumps({"kind": "request", "slot": slot, "value": value,
                              "turn_index": index}, ensure_ascii=False)
                  for slot, value, index in item.gold_requests]
        gold_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        results_doc: dict = {}
        for (intent, occurrence), rows in item.replay_results.items():
            results_doc.setdefault(intent, {})[str(occurrence)] = rows
        results_path = out_dir / "results" / f"{item.dialog_id}.json"
        results_path.parent.mkdir(parents=True, exist_ok=True)
        results_path.write_text(json.dumps(results_doc, indent=2,
                                           ensure_ascii=False) + "\n",
                                encoding="utf-8")
