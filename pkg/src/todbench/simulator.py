"""Goal-driven user simulator.

A deterministic scripted policy drives the user side of a session: it
expresses each goal call's slot values (at most two per turn), answers the
slots the system asks for, affirms confirmations, asks its request slots
once the goal call has executed, and closes when every goal is done.

State moves through expressing -> awaiting_result -> requesting per goal.
Execution is signalled by the orchestrator through `observe_api_call`, which
keeps `next_user_turn` a pure function of (state, goal, last_system_turn).

An LLM-backed mode (`LlmUserSimulator`) assembles a prompt from the goal
calls, request slots, and history and delegates to a generation backend.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .backends import Backend, GenerationRequest
from .calls import ApiCall, ParamTriple, canonicalize, parse_call, serialize
from .errors import ContractViolation, MalformedDocument, StuckDialog
from .schema import IntentDef, SchemaRegistry, resolve_intent
from .textnorm import normalize_name

PHASE_EXPRESSING = "expressing"
PHASE_AWAITING = "awaiting_result"
PHASE_REQUESTING = "requesting"
PHASE_DONE = "done"

MAX_SLOTS_PER_TURN = 2
STUCK_LIMIT = 6
AFFIRM_UTTERANCE = "Yes, that's correct."


@dataclass(frozen=True)
class UserGoal:
    goal_calls: tuple[ApiCall, ...]
    request_slots: dict[int, tuple[str, ...]] = field(default_factory=dict)
    closing_utterance: str = "Thank you, that's all I need for now."

    def __post_init__(self):
        for index in self.request_slots:
            if not 0 <= index < len(self.goal_calls):
                raise MalformedDocument(
                    f"request_slots index {index} out of range")


@dataclass(frozen=True)
class SimulatorState:
    current_goal: int = 0
    revealed_slots: frozenset[tuple[int, str]] = frozenset()
    pending_requests: tuple[str, ...] = ()
    executed: bool = False
    phase: str = PHASE_EXPRESSING
    no_progress: int = 0


def initial_state(goal: UserGoal) -> SimulatorState:
    if not goal.goal_calls:
        return SimulatorState(phase=PHASE_DONE)
    return SimulatorState(pending_requests=tuple(goal.request_slots.get(0, ())))


# ---------------------------------------------------------------------------
# Surface templating. Values are interpolated verbatim; only the wording
# around them is templated.

_CAMEL_SPLIT = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_TIME_24H = re.compile(r"^([01]?\d|2[0-3]):([0-5]\d)$")


def _words(name: str) -> str:
    return _CAMEL_SPLIT.sub(" ", name).replace("_", " ").lower()


def _time_aside(value: str) -> str:
    match = _TIME_24H.match(value.strip())
    if not match:
        return ""
    hour, minute = int(match.group(1)), match.group(2)
    suffix = "AM" if hour < 12 else "PM"
    return f" ({hour % 12 or 12}:{minute} {suffix})"


_OPERATOR_PHRASE = {"at_least": "at least ", "at_most": "at most ",
                    "not": "not ", "one_of": "one of "}


def _value_phrase(triple: ParamTriple) -> str:
    if isinstance(triple.value, tuple):
        rendered = " or ".join(triple.value)
    else:
        rendered = triple.value + _time_aside(triple.value)
    return _OPERATOR_PHRASE.get(triple.operator, "") + rendered


def _reveal_sentence(triple: ParamTriple) -> str:
    return f"The {_words(triple.name)} is {_value_phrase(triple)}."


def _opener(call: ApiCall) -> str:
    return f"I'm looking to {_words(call.method)}."


def _request_sentence(slot: str) -> str:
    return f"What is the {_words(slot)}?"


# ---------------------------------------------------------------------------
# Requested-slot detection

def _slot_surfaces(name: str, aliases: Sequence[str]) -> list[str]:
    surfaces = {name, name.replace("_", " "), _words(name)}
    for alias in aliases:
        surfaces.update({alias, alias.replace("_", " ")})
    return sorted(surfaces, key=len, reverse=True)


def detect_requested_slots(system_text: str, current_intent: IntentDef,
                           registry: SchemaRegistry) -> list[str]:
    """Schema slot names (of the intent's domain) whose name or alias occurs
    in the text as a word-boundary match, in text order, deduplicated."""
    resolved = resolve_intent(registry, current_intent.name)
    if resolved is None:
        return []
    domain = registry.get(resolved[0])
    haystack = system_text.casefold()
    hits: list[tuple[int, str]] = []
    for slot in domain.slots:
        best: Optional[int] = None
        for surface in _slot_surfaces(slot.name, slot.aliases):
            pattern = r"(?<!\w)" + re.escape(surface.casefold()) + r"(?!\w)"
            match = re.search(pattern, haystack)
            if match and (best is None or match.start() < best):
                best = match.start()
        if best is not None:
            hits.append((best, slot.name))
    hits.sort()
    return [name for _, name in hits]


# ---------------------------------------------------------------------------
# Scripted policy

def observe_api_call(state: SimulatorState, goal: UserGoal,
                     call: ApiCall) -> SimulatorState:
    """Orchestrator hook: a call was recorded this system step. The current
    goal counts as executed when the method matches it."""
    if state.phase == PHASE_DONE or state.current_goal >= len(goal.goal_calls):
        return state
    expected = goal.goal_calls[state.current_goal]
    if normalize_name(call.method) == normalize_name(expected.method):
        return replace(state, executed=True, no_progress=0)
    return state


def _unrevealed(state: SimulatorState, goal: UserGoal,
                registry: SchemaRegistry) -> list[ParamTriple]:
    call = goal.goal_calls[state.current_goal]
    resolved = resolve_intent(registry, call.method)
    required: set[str] = set()
    if resolved is not None:
        required = {normalize_name(s) for s in resolved[1].required_slots}
    remaining = [t for t in call.params
                 if (state.current_goal, normalize_name(t.name)) not in state.revealed_slots]
    remaining.sort(key=lambda t: 0 if normalize_name(t.name) in required else 1)
    return remaining


def _reveal(state: SimulatorState, goal: UserGoal, triples: list[ParamTriple],
            lead_in: str = "") -> tuple[str, SimulatorState]:
    chosen = triples[:MAX_SLOTS_PER_TURN]
    sentences = ([lead_in] if lead_in else []) + [_reveal_sentence(t) for t in chosen]
    revealed = state.revealed_slots | {
        (state.current_goal, normalize_name(t.name)) for t in chosen}
    call = goal.goal_calls[state.current_goal]
    all_named = {normalize_name(t.name) for t in call.params}
    now_revealed = {name for gi, name in revealed if gi == state.current_goal}
    phase = PHASE_AWAITING if all_named <= now_revealed else PHASE_EXPRESSING
    new_state = replace(state, revealed_slots=frozenset(revealed), phase=phase,
                        no_progress=0)
    return " ".join(sentences), new_state


def _stall(state: SimulatorState, goal: UserGoal) -> tuple[str, SimulatorState]:
    if state.no_progress + 1 >= STUCK_LIMIT:
        raise StuckDialog(
            f"no simulator progress for {STUCK_LIMIT} consecutive turns")
    call = goal.goal_calls[state.current_goal]
    restated = [_reveal_sentence(t) for t in call.params[:MAX_SLOTS_PER_TURN]]
    text = "Just to confirm: " + " ".join(restated)
    return text, replace(state, no_progress=state.no_progress + 1)


def _mentions_revealed_value(state: SimulatorState, goal: UserGoal,
                             text: str) -> bool:
    haystack = text.casefold()
    call = goal.goal_calls[state.current_goal]
    for triple in call.params:
        if (state.current_goal, normalize_name(triple.name)) not in state.revealed_slots:
            continue
        values = triple.value if isinstance(triple.value, tuple) else (triple.value,)
        if any(v.casefold() in haystack for v in values):
            return True
    return False


def next_user_turn(state: SimulatorState, goal: UserGoal,
                   last_system_turn: Optional[str],
                   registry: SchemaRegistry) -> tuple[str, SimulatorState]:
    """Produce the next user utterance. Deterministic in its arguments;
    raises StuckDialog after STUCK_LIMIT consecutive turns without progress."""
    if state.phase == PHASE_DONE:
        raise ContractViolation("next_user_turn called after the dialog ended")

    if state.executed and not state.pending_requests:
        next_goal = state.current_goal + 1
        if next_goal >= len(goal.goal_calls):
            done = replace(state, current_goal=next_goal, executed=False,
                           phase=PHASE_DONE, no_progress=0)
            return goal.closing_utterance, done
        advanced = replace(state, current_goal=next_goal, executed=False,
                           phase=PHASE_EXPRESSING, no_progress=0,
                           pending_requests=tuple(goal.request_slots.get(next_goal, ())))
        remaining = _unrevealed(advanced, goal, registry)
        return _reveal(advanced, goal, remaining,
                       lead_in=_opener(goal.goal_calls[next_goal]))

    if state.executed and state.pending_requests:
        slot, rest = state.pending_requests[0], state.pending_requests[1:]
        asking = replace(state, pending_requests=rest, phase=PHASE_REQUESTING,
                         no_progress=0)
        return _request_sentence(slot), asking

    call = goal.goal_calls[state.current_goal]
    resolved = resolve_intent(registry, call.method)
    detected: list[str] = []
    if last_system_turn and resolved is not None:
        detected = detect_requested_slots(last_system_turn, resolved[1], registry)
    detected_keys = [normalize_name(s) for s in detected]
    answerable = [t for t in _unrevealed(state, goal, registry)
                  if normalize_name(t.name) in detected_keys]
    if answerable:
        answerable.sort(key=lambda t: detected_keys.index(normalize_name(t.name)))
        return _reveal(state, goal, answerable)

    if last_system_turn and "?" in last_system_turn \
            and _mentions_revealed_value(state, goal, last_system_turn):
        if state.no_progress + 1 >= STUCK_LIMIT:
            raise StuckDialog(
                f"no simulator progress for {STUCK_LIMIT} consecutive turns")
        return AFFIRM_UTTERANCE, replace(state, no_progress=state.no_progress + 1)

    remaining = _unrevealed(state, goal, registry)
    if remaining:
        lead_in = "" if any(gi == state.current_goal
                            for gi, _ in state.revealed_slots) else _opener(call)
        return _reveal(state, goal, remaining, lead_in=lead_in)
    return _stall(state, goal)


# ---------------------------------------------------------------------------
# Goal file format: {"goal_calls": [...], "request_slots":
# [{"goal_index": 0, "slots": [...]}], "closing_utterance": "..."}

def goal_from_document(doc: dict) -> UserGoal:
    try:
        calls = tuple(canonicalize(parse_call(text)) for text in doc["goal_calls"])
        request_slots = {
            int(entry["goal_index"]): tuple(entry["slots"])
            for entry in doc.get("request_slots", [])
        }
        closing = doc.get("closing_utterance",
                          "Thank you, that's all I need for now.")
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocument(f"bad user goal document: {exc}") from exc
    return UserGoal(goal_calls=calls, request_slots=request_slots,
                    closing_utterance=closing)


def goal_to_document(goal: UserGoal) -> dict:
    return {
        "goal_calls": [serialize(call) for call in goal.goal_calls],
        "request_slots": [
            {"goal_index": index, "slots": list(slots)}
            for index, slots in sorted(goal.request_slots.items())
        ],
        "closing_utterance": goal.closing_utterance,
    }


def load_goal_file(path) -> UserGoal:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{path}: not JSON: {exc}") from exc
    return goal_from_document(doc)


# ---------------------------------------------------------------------------
# LLM-backed mode (optional; the scripted policy is the default)

_SIMULATOR_PROMPT = """You are role-playing a customer in a task-oriented \
conversation. Express the goals below one at a time, in order, giving at \
most two details per message. After a goal is handled, ask for the listed \
follow-up information. When everything is done, say: {closing}

Goals, expressed as the API calls the assistant should end up making:
{goals}

Follow-up information to request, per goal:
{requests}

Write only the customer's next message."""


class LlmUserSimulator:
    """Delegates utterance generation to a backend, conditioned on the goal
    calls, request slots, and dialog history."""

    def __init__(self, backend: Backend, goal: UserGoal, session_id: str = ""):
        self._backend = backend
        self._goal = goal
        self._session_id = session_id

    def respond(self, history_lines: Sequence[str]) -> str:
        goals = "\n".join(serialize(c) for c in self._goal.goal_calls)
        requests = "\n".join(
            f"goal {index}: {', '.join(slots)}"
            for index, slots in sorted(self._goal.request_slots.items())) or "none"
        prompt = _SIMULATOR_PROMPT.format(
            closing=self._goal.closing_utterance, goals=goals, requests=requests)
        messages = [("system", prompt)]
        if history_lines:
            messages.append(("user", "\n".join(history_lines)))
        else:
            messages.append(("user", "(start of conversation)"))
        result = self._backend.generate(GenerationRequest(
            messages=tuple(messages), session_id=self._session_id))
        return result.text.strip()
