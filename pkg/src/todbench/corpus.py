"""Canonical corpus: the on-disk layout shared by the fixture corpus and the
dataset converters, plus loading and validation.

Layout under a corpus root:

    schemas/<domain>.json      schema documents (see schema module)
    goals/<dialog_id>.json     user goals (see simulator module)
    gold/<dialog_id>.jsonl     lines {"kind": "call", "call": "APICall(...)"}
                               and {"kind": "request", "slot": ..., "value": ...,
                                    "turn_index": ...} in order
    results/<dialog_id>.json   {"<intent>": {"<occurrence>": [rows...]}}
    seeds/<domain>.jsonl       seed exemplar transcripts for prompt chaining
                               (their schemas live in schemas/)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .calls import ApiCall, canonicalize, parse_call
from .errors import MalformedDocument, SchemaViolation
from .schema import DomainSchema, SchemaRegistry, build_registry, load_schema_file, resolve_intent
from .simulator import UserGoal, load_goal_file
from .textnorm import normalize_name
from .transcript import DialogTranscript, load_transcripts
from .validator import validate


@dataclass(frozen=True)
class CorpusItem:
    dialog_id: str
    domains: tuple[str, ...]
    goal: UserGoal
    gold_calls: tuple[ApiCall, ...]
    gold_requests: tuple[tuple[str, str, int], ...]  # (slot, value, turn_index)
    replay_results: dict  # (intent, occurrence) -> [rows]
    domain_class: str  # "single" | "multi"

    def request_value(self, slot: str) -> str:
        for name, value, _ in self.gold_requests:
            if normalize_name(name) == normalize_name(slot):
                return value
        raise KeyError(slot)


@dataclass(frozen=True)
class Corpus:
    root: Path
    registry: SchemaRegistry
    items: tuple[CorpusItem, ...]
    seeds: tuple[tuple[DomainSchema, DialogTranscript], ...]
    digest: str

    def item(self, dialog_id: str) -> CorpusItem:
        for item in self.items:
            if item.dialog_id == dialog_id:
                return item
        raise KeyError(dialog_id)


def _load_gold_lines(path: Path) -> tuple[list[ApiCall], list[tuple[str, str, int]]]:
    calls: list[ApiCall] = []
    requests: list[tuple[str, str, int]] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{line_no}: not JSON: {exc}") from exc
            kind = doc.get("kind")
            if kind == "call":
                calls.append(canonicalize(parse_call(doc["call"])))
            elif kind == "request":
                requests.append((doc["slot"], str(doc["value"]),
                                 int(doc["turn_index"])))
            else:
                raise MalformedDocument(f"{path}:{line_no}: unknown kind {kind!r}")
    return calls, requests


def _load_results(path: Path) -> dict:
    if not path.exists():
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        doc = json.load(handle)
    results = {}
    for intent, by_occurrence in doc.items():
        for occurrence, rows in by_occurrence.items():
            results[(intent, int(occurrence))] = rows
    return results


def _item_domains(calls, registry: SchemaRegistry) -> tuple[str, ...]:
    domains: list[str] = []
    for call in calls:
        resolved = resolve_intent(registry, call.method)
        if resolved is None:
            raise SchemaViolation(f"gold call method {call.method!r} "
                                  "resolves to no registered intent")
        if resolved[0] not in domains:
            domains.append(resolved[0])
    return tuple(domains)


def _validate_item(item: CorpusItem, registry: SchemaRegistry) -> None:
    for call in item.gold_calls:
        verdict = validate(call, registry)
        if not verdict.ok:
            kinds = [e.kind for e in verdict.errors]
            raise SchemaViolation(
                f"{item.dialog_id}: gold call {call.method} fails validation: {kinds}")
    row_text = json.dumps([rows for rows in item.replay_results.values()])
    for slot, value, _ in item.gold_requests:
        if value not in row_text:
            raise SchemaViolation(
                f"{item.dialog_id}: request value {value!r} for slot {slot!r} "
                "appears in no replay result row")


def corpus_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(path.relative_to(root).as_posix().encode("utf-8"))
            digest.update(b"\x00")
            digest.update(path.read_bytes())
            digest.update(b"\x00")
    return digest.hexdigest()


def load_corpus(root) -> Corpus:
    root = Path(root)
    schema_dir = root / "schemas"
    if not schema_dir.is_dir():
        raise MalformedDocument(f"{root}: no schemas/ directory")
    schemas = [load_schema_file(path) for path in sorted(schema_dir.glob("*.json"))]
    registry = build_registry(schemas)

    items: list[CorpusItem] = []
    for goal_path in sorted((root / "goals").glob("*.json")):
        dialog_id = goal_path.stem
        goal = load_goal_file(goal_path)
        gold_path = root / "gold" / f"{dialog_id}.jsonl"
        if not gold_path.exists():
            raise MalformedDocument(f"{gold_path}: missing gold file")
        gold_calls, gold_requests = _load_gold_lines(gold_path)
        replay_results = _load_results(root / "results" / f"{dialog_id}.json")
        domains = _item_domains(gold_calls, registry)
        item = CorpusItem(
            dialog_id=dialog_id, domains=domains, goal=goal,
            gold_calls=tuple(gold_calls), gold_requests=tuple(gold_requests),
            replay_results=replay_results,
            domain_class="multi" if len(domains) > 1 else "single")
        _validate_item(item, registry)
        items.append(item)

    seeds: list[tuple[DomainSchema, DialogTranscript]] = []
    seed_dir = root / "seeds"
    if seed_dir.is_dir():
        for seed_path in sorted(seed_dir.glob("*.jsonl")):
            transcripts = load_transcripts(seed_path)
            if not transcripts:
                continue
            schema = registry.get(seed_path.stem)
            if schema is None:
                raise MalformedDocument(
                    f"{seed_path}: seed domain {seed_path.stem!r} has no schema")
            seeds.append((schema, transcripts[0]))

    return Corpus(root=root, registry=registry, items=tuple(items),
                  seeds=tuple(seeds), digest=corpus_digest(root))
