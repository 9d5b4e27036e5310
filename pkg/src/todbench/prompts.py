"""Two-stage prompt chaining: render the example-dialog generation prompt
(stage 1) and the live task-adaptation prompt (stage 2), synthesize and cache
example dialogs, and gate them behind a quality check.

Rendering is deterministic; golden files under goldens/<TEMPLATE_VERSION>
pin the exact bytes. TEMPLATE_VERSION participates in cache keys and config
fingerprints so template edits invalidate both.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .backends import Backend, GenerationRequest
from .calls import CALL_PREFIX, extract_api_call
from .errors import EmptyDialog, ExemplarGenerationFailed, ParseError
from .schema import DomainSchema, SchemaRegistry, build_registry
from .textnorm import normalize_name
from .transcript import (
    AttemptRecord,
    DialogTranscript,
    Turn,
    load_transcripts,
    render_history_lines,
    write_transcripts,
)
from .validator import ValidationVerdict, validate

TEMPLATE_VERSION = "v1"

_P1_TASK = (
    "Task Description:\n"
    "Your task is to generate a dialog conversation between a User and a "
    "System based on a given domain schema. I will provide a Schema for "
    "{source}, which defines the structure and relevant entities, along with "
    "a corresponding dialog conversation for reference. Your goal is to "
    "analyze the relationship between the dialog and the schema and then "
    "generate a coherent and contextually appropriate dialog conversation "
    "for {targets} while maintaining consistency with its schema."
)

_P1_BRIDGE = (
    "Now, understand the above conversation structure between a User and a "
    "System. You will be given a new Schema for {targets}. You have to "
    "generate a full-fledged conversation for the new domain that will be "
    "structured like the example above."
)

_P1_CLOSING = (
    "Based on the above instructions and example conversation from the "
    "{source}, learn how to generate the full conversation for the new "
    "{targets} domain.\n"
    "End of Instructions."
)

_P2_TASK = (
    "Task Description:\n"
    "Think of yourself as an expert chat assistant specialized in the "
    "{targets} domain. Your task is to generate the most natural and helpful "
    "responses for a given task-oriented dialog context. I will provide a "
    "Schema for {targets}, one sample conversation between a System and a "
    "User, and, optionally, search results from the database. Understand the "
    "dialog relation to the Schema. You can request slot values from the "
    "User to fulfill the User's current intent. Remember that required slots "
    "are more important than optional slots. When making API calls, use "
    "column names from the Schema as parameters. Match the required and "
    "optional slots with the column names and use them in API calls. Before "
    "making the call, ensure you've gathered all required slots from the "
    "User. You can skip unnecessary parameters."
)

_P2_BRIDGE = (
    "Understand the above structure of conversation between a User and a "
    "System. Learn how to interact with the User and generate the most "
    "human-like conversational response to the User's intent. You may need "
    "to make API Calls and use the API Call results."
)

GUIDELINES_BLOCK = """Here are a few general Guidelines to follow:
- Please avoid asking for too many slots in one turn; ideally, ask one slot at a time.
- Don't overwhelm the User with too many questions or choices in one turn.
- Confirm the slot values with the User before finalizing the API Call.
- Follow the structure of API Call from the above example whenever you are making an API Call.
- If you're unsure about something, it's always better to ask or confirm with the User.
- Do not provide all the information in the search results to the User. Provide details only if the User requests them.
- If you feel the User is confused, guide the User with relevant suggestions and ensure it is relevant to their current intent.
- You generate only one system response at a time and do not produce search results yourself; search results will be provided to you."""

HISTORY_HEADER = "Conversation history:"


@dataclass(frozen=True)
class PromptP1:
    source_schema: DomainSchema
    source_dialog: DialogTranscript
    target_schemas: tuple[DomainSchema, ...]
    rendered: str


@dataclass(frozen=True)
class PromptP2:
    target_schemas: tuple[DomainSchema, ...]
    example_dialog: DialogTranscript
    history: tuple[Turn, ...]
    rendered: str


def _join(values: Sequence[str]) -> str:
    return ", ".join(values)


def render_schema_block(schema: DomainSchema) -> str:
    lines = [f"Here is a Schema for the {schema.domain_name}",
             f"service_name: {schema.domain_name}",
             "Intents"]
    for number, intent in enumerate(schema.intents, start=1):
        lines.append(f"  {number}.")
        lines.append(f"  name: {intent.name}")
        lines.append(f"  is_transactional: {intent.is_transactional}")
        lines.append(f"  required_slots: {_join(intent.required_slots)}".rstrip())
        lines.append(f"  optional_slots: {_join(intent.optional_slots)}".rstrip())
    lines.append("Slots")
    for slot in schema.slots:
        lines.append(f"  slot_name: {slot.name}")
        lines.append(f"  possible_values: {_join(slot.possible_values)}".rstrip())
    lines.append(f"end of schema for {schema.domain_name}")
    return "\n".join(lines)


def _render_dialog(dialog: DialogTranscript) -> str:
    header = "A sample << Dialog Conversation >> between a System and a User:"
    return header + "\n" + "\n".join(render_history_lines(dialog.turns))


def _domains_phrase(schemas: Sequence[DomainSchema]) -> str:
    return " + ".join(s.domain_name for s in schemas)


SchemaOrSchemas = Union[DomainSchema, Sequence[DomainSchema]]


def _as_schemas(value: SchemaOrSchemas) -> tuple[DomainSchema, ...]:
    if isinstance(value, DomainSchema):
        return (value,)
    return tuple(value)


def render_p1(source_schema: DomainSchema, source_dialog: DialogTranscript,
              target_schemas: SchemaOrSchemas) -> PromptP1:
    """Stage-1 prompt: task description, source schema, source dialog, one
    block per target schema, closing instruction."""
    if not source_dialog.turns:
        raise EmptyDialog("source dialog has no turns")
    targets = _as_schemas(target_schemas)
    targets_name = _domains_phrase(targets)
    sections = [
        _P1_TASK.format(source=source_schema.domain_name, targets=targets_name),
        render_schema_block(source_schema),
        _render_dialog(source_dialog),
        _P1_BRIDGE.format(targets=targets_name),
    ]
    sections.extend(render_schema_block(schema) for schema in targets)
    sections.append(_P1_CLOSING.format(source=source_schema.domain_name,
                                       targets=targets_name))
    return PromptP1(source_schema=source_schema, source_dialog=source_dialog,
                    target_schemas=targets, rendered="\n\n".join(sections))


def render_p2(target_schemas: SchemaOrSchemas, example_dialog: DialogTranscript,
              history: Sequence[Turn]) -> PromptP2:
    """Stage-2 prompt: task description, schema blocks in registration order,
    example dialog, the guidelines block verbatim, then the history."""
    targets = _as_schemas(target_schemas)
    targets_name = _domains_phrase(targets)
    sections = [_P2_TASK.format(targets=targets_name)]
    sections.extend(render_schema_block(schema) for schema in targets)
    sections.append(_render_dialog(example_dialog))
    sections.append(_P2_BRIDGE)
    sections.append(GUIDELINES_BLOCK)
    history_lines = render_history_lines(history)
    sections.append(HISTORY_HEADER + ("\n" + "\n".join(history_lines)
                                      if history_lines else ""))
    return PromptP2(target_schemas=targets, example_dialog=example_dialog,
                    history=tuple(history), rendered="\n\n".join(sections))


# ---------------------------------------------------------------------------
# Stage-1 completion parsing

_USER_PREFIXES = ("User:",)
_SYSTEM_PREFIXES = ("System:", "Assistant:")
_SEARCH_PREFIX = "Search Results:"


def parse_stage1_completion(text: str, dialog_id: str, domains: Sequence[str],
                            registry: Optional[SchemaRegistry] = None
                            ) -> DialogTranscript:
    """Classify completion lines into turns: User:/System: prefixes, bare
    APICall( lines, Search Results: lines; unprefixed lines attach to the
    previous turn."""
    turns: list[Turn] = []
    counter = 0

    def push(role: str, content: str, call=None, trail=()):
        nonlocal counter
        turns.append(Turn(role=role, text=content, call=call,
                          attempt_trail=trail, timestamp=counter))
        counter += 1

    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        matched = False
        for prefix in _USER_PREFIXES:
            if line.startswith(prefix):
                push("user", line[len(prefix):].strip())
                matched = True
                break
        if matched:
            continue
        for prefix in _SYSTEM_PREFIXES:
            if line.startswith(prefix):
                push("system", line[len(prefix):].strip())
                matched = True
                break
        if matched:
            continue
        if line.startswith(_SEARCH_PREFIX):
            push("search_results", line[len(_SEARCH_PREFIX):].strip())
            continue
        if line.startswith(CALL_PREFIX):
            try:
                call = extract_api_call(line)
            except ParseError:
                call = None
            if call is not None:
                verdict = validate(call, registry) if registry is not None \
                    else ValidationVerdict(ok=True)
                push("api_call", line, call=call,
                     trail=(AttemptRecord(raw_text=line, verdict=verdict),))
                continue
        if turns:
            previous = turns[-1]
            turns[-1] = Turn(role=previous.role,
                             text=(previous.text + " " + line).strip(),
                             call=previous.call,
                             attempt_trail=previous.attempt_trail,
                             timestamp=previous.timestamp)
    return DialogTranscript(dialog_id=dialog_id, domains=tuple(domains),
                            turns=tuple(turns))


def exemplar_quality_check(transcript: DialogTranscript,
                           target_schemas: SchemaOrSchemas) -> bool:
    """At least 4 turns, user/system strictly alternating starting with the
    user, at least one API call, and every call valid against the target
    schemas."""
    if len(transcript.turns) < 4:
        return False
    top_level = [t.role for t in transcript.turns if t.role in ("user", "system")]
    if not top_level or top_level[0] != "user":
        return False
    for earlier, later in zip(top_level, top_level[1:]):
        if earlier == later:
            return False
    registry = build_registry(_as_schemas(target_schemas))
    calls = [turn.call for turn in transcript.turns
             if turn.role == "api_call" and turn.call is not None]
    return bool(calls) and all(validate(call, registry).ok for call in calls)


# ---------------------------------------------------------------------------
# Exemplar cache (single-flight) and stage-1 generation

def cache_key(domain_names: Sequence[str], model_id: str,
              template_version: str = TEMPLATE_VERSION) -> str:
    parts = sorted(normalize_name(name) for name in domain_names)
    digest = hashlib.sha256(
        "\x1f".join(parts + [model_id, template_version]).encode("utf-8"))
    return digest.hexdigest()[:32]


def exemplar_session_id(domain_names: Sequence[str]) -> str:
    """Deterministic replay-backend session key for stage-1 generations."""
    return "exemplar:" + "+".join(sorted(normalize_name(n) for n in domain_names))


class ExemplarCache:
    """Keyed transcript cache with a single-flight guarantee: concurrent
    misses on one key trigger exactly one generation. Optionally persists one
    transcript file per key."""

    def __init__(self, directory: Optional[Path] = None):
        self._directory = Path(directory) if directory is not None else None
        if self._directory is not None:
            self._directory.mkdir(parents=True, exist_ok=True)
        self._entries: dict[str, DialogTranscript] = {}
        self._failures: dict[str, ExemplarGenerationFailed] = {}
        self._key_locks: dict[str, threading.Lock] = {}
        self._mutex = threading.Lock()

    def _lock_for(self, key: str) -> threading.Lock:
        with self._mutex:
            return self._key_locks.setdefault(key, threading.Lock())

    def _path_for(self, key: str) -> Optional[Path]:
        if self._directory is None:
            return None
        return self._directory / f"{key}.jsonl"

    def lookup(self, key: str) -> Optional[DialogTranscript]:
        with self._mutex:
            if key in self._entries:
                return self._entries[key]
        path = self._path_for(key)
        if path is not None and path.exists():
            transcripts = load_transcripts(path)
            if transcripts:
                with self._mutex:
                    self._entries[key] = transcripts[0]
                return transcripts[0]
        return None

    def put(self, key: str, transcript: DialogTranscript) -> None:
        with self._mutex:
            self._entries[key] = transcript
        path = self._path_for(key)
        if path is not None:
            write_transcripts(path, [transcript])

    def get_or_create(self, key: str,
                      producer: Callable[[], DialogTranscript],
                      accept: Optional[Callable[[DialogTranscript], bool]] = None
                      ) -> DialogTranscript:
        """Single-flight lookup: per key there is at most one generation
        sequence for this cache's lifetime. Entries failing `accept` (stale
        or corrupt persisted files) are regenerated rather than served, and
        a failed generation is remembered and re-raised on later misses."""
        cached = self.lookup(key)
        if cached is not None and (accept is None or accept(cached)):
            return cached
        with self._lock_for(key):
            with self._mutex:
                failure = self._failures.get(key)
            if failure is not None:
                raise failure
            cached = self.lookup(key)
            if cached is not None and (accept is None or accept(cached)):
                return cached
            try:
                transcript = producer()
            except ExemplarGenerationFailed as exc:
                with self._mutex:
                    self._failures[key] = exc
                raise
            self.put(key, transcript)
            return transcript


STAGE1_ATTEMPTS = 3


def generate_exemplar(backend: Backend, source_schema: DomainSchema,
                      source_dialog: DialogTranscript,
                      target_schemas: SchemaOrSchemas,
                      cache: Optional[ExemplarCache] = None,
                      max_tokens: int = 2048) -> DialogTranscript:
    """Run stage 1: send the rendered P1, parse the completion into a
    transcript, and keep retrying (up to STAGE1_ATTEMPTS) until the quality
    check passes. Results are cached per (domains, model, template version)."""
    targets = _as_schemas(target_schemas)
    domain_names = [schema.domain_name for schema in targets]
    registry = build_registry(targets)

    def produce() -> DialogTranscript:
        prompt = render_p1(source_schema, source_dialog, targets)
        session = exemplar_session_id(domain_names)
        last_completion = ""
        for attempt in range(STAGE1_ATTEMPTS):
            result = backend.generate(GenerationRequest(
                messages=(("system", prompt.rendered),
                          ("user", "Generate the conversation now.")),
                max_tokens=max_tokens, model_id=backend.model_id,
                session_id=session))
            last_completion = result.text
            transcript = parse_stage1_completion(
                result.text,
                dialog_id=f"exemplar-{'+'.join(domain_names)}-{attempt}",
                domains=domain_names, registry=registry)
            if exemplar_quality_check(transcript, targets):
                return transcript
        raise ExemplarGenerationFailed(
            f"no acceptable example dialog after {STAGE1_ATTEMPTS} attempts "
            f"for domains {domain_names}", last_completion=last_completion)

    if cache is None:
        return produce()
    key = cache_key(domain_names, backend.model_id)
    return cache.get_or_create(
        key, produce, accept=lambda t: exemplar_quality_check(t, targets))


def choose_source_seed(seeds: Sequence[tuple[DomainSchema, DialogTranscript]],
                       target_schemas: SchemaOrSchemas
                       ) -> tuple[DomainSchema, DialogTranscript]:
    """Deterministic seed pick: intent count closest to the combined target
    intent count, ties by domain name."""
    targets = _as_schemas(target_schemas)
    if not seeds:
        raise ValueError("no seed exemplars available")
    target_intents = sum(len(schema.intents) for schema in targets)
    return min(seeds, key=lambda pair: (abs(len(pair[0].intents) - target_intents),
                                        pair[0].domain_name))
