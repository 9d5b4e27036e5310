"""Session orchestration: alternate simulator and system turns, extract and
validate API calls, run the feedback retry loop, serve search results, and
record the transcript.

One session is internally sequential; many sessions may run concurrently
sharing only the immutable registry, the backend handle, and the exemplar
cache. Feedback messages travel to the backend as an extra user-role message
on the retry request only; they are recorded as feedback turns but never
shown to the simulator and never rendered into later prompts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .backends import Backend, GenerationRequest
from .calls import ApiCall, canonicalize, extract_api_call, serialize
from .errors import BackendError, ContractViolation, ParseError, StuckDialog, TodbenchError
from .prompts import exemplar_quality_check, render_p2
from .schema import DomainSchema, SchemaRegistry, resolve_intent
from .simulator import UserGoal, initial_state, next_user_turn, observe_api_call
from .textnorm import normalize_name, normalize_text
from .transcript import (
    STATUS_BACKEND_ERROR,
    STATUS_COMPLETE,
    STATUS_STUCK,
    STATUS_TURN_CAP,
    AttemptRecord,
    DialogTranscript,
    Turn,
)
from .validator import feedback_message, validate


@dataclass(frozen=True)
class SessionOptions:
    max_feedback_retries: int = 3
    turn_cap: int = 40
    no_feedback: bool = False
    no_chain: bool = False
    max_tokens: int = 1024


class SessionBackendError(TodbenchError):
    """Backend failure mid-session; carries the partial transcript."""

    def __init__(self, transcript: DialogTranscript, cause: BackendError):
        super().__init__(str(cause))
        self.transcript = transcript
        self.cause = cause


# ---------------------------------------------------------------------------
# Search providers

REPLAY = "replay"
TABULAR = "tabular"


@dataclass
class SearchProvider:
    """Replay mode answers (intent, occurrence) from recorded rows; tabular
    mode filters a per-domain row store with the call's operators."""

    registry: SchemaRegistry
    mode: str = REPLAY
    replay_results: dict = field(default_factory=dict)
    table: dict = field(default_factory=dict)
    _occurrences: Counter = field(default_factory=Counter, repr=False)

    def __post_init__(self):
        self.replay_results = {
            (normalize_name(intent), occurrence): rows
            for (intent, occurrence), rows in self.replay_results.items()
        }
        self.table = {normalize_name(domain): rows
                      for domain, rows in self.table.items()}


def _as_number(value) -> Optional[float]:
    try:
        return float(str(value).strip())
    except ValueError:
        return None


def _row_matches(row: dict, call: ApiCall) -> bool:
    for triple in call.params:
        key = next((k for k in row if normalize_name(k) == normalize_name(triple.name)),
                   None)
        if triple.operator == "not":
            if key is not None and \
                    normalize_text(str(row[key])) == normalize_text(str(triple.value)):
                return False
            continue
        if key is None:
            return False
        cell = str(row[key])
        if triple.operator in ("equal_to", "none"):
            if normalize_text(cell) != normalize_text(str(triple.value)):
                return False
        elif triple.operator in ("at_least", "at_most"):
            have, want = _as_number(cell), _as_number(triple.value)
            if have is None or want is None:
                return False
            if triple.operator == "at_least" and have < want:
                return False
            if triple.operator == "at_most" and have > want:
                return False
        elif triple.operator == "one_of":
            items = triple.value if isinstance(triple.value, tuple) else (triple.value,)
            if normalize_text(cell) not in {normalize_text(v) for v in items}:
                return False
    return True


def lookup_results(provider: SearchProvider, call: ApiCall) -> list[dict]:
    """Rows for a recorded call; an empty result is valid data."""
    resolved = resolve_intent(provider.registry, call.method)
    if provider.mode == REPLAY:
        if resolved is None:
            return []
        intent_key = normalize_name(resolved[1].name)
        occurrence = provider._occurrences[intent_key]
        provider._occurrences[intent_key] += 1
        return provider.replay_results.get((intent_key, occurrence), [])
    if resolved is None:
        return []
    rows = provider.table.get(normalize_name(resolved[0]), [])
    return [row for row in rows if _row_matches(row, call)]


def render_rows(rows: Sequence[dict]) -> str:
    return repr(list(rows))


# ---------------------------------------------------------------------------
# The session loop

class _TurnCapReached(Exception):
    pass


def session_domains(goal: UserGoal, registry: SchemaRegistry) -> tuple[str, ...]:
    """Domains touched by the goal calls, in first-use order."""
    domains: list[str] = []
    for call in goal.goal_calls:
        resolved = resolve_intent(registry, call.method)
        if resolved is not None and resolved[0] not in domains:
            domains.append(resolved[0])
    return tuple(domains)


def run_session(goal: UserGoal, registry: SchemaRegistry, backend: Backend,
                exemplar: DialogTranscript, provider: SearchProvider,
                opts: SessionOptions = SessionOptions(),
                dialog_id: str = "session",
                config_fingerprint: str = "") -> DialogTranscript:
    """Run one full dialog session and return its transcript. StuckDialog and
    the turn cap truncate the transcript with a status flag; a BackendError
    is re-raised as SessionBackendError carrying the partial transcript."""
    domains = session_domains(goal, registry)
    schemas: list[DomainSchema] = [registry.get(d) for d in domains]
    if not opts.no_chain and not exemplar_quality_check(exemplar, schemas):
        raise ContractViolation("exemplar fails the quality check")

    turns: list[Turn] = []
    status = STATUS_COMPLETE

    def append(role: str, text: str, call: Optional[ApiCall] = None,
               trail: tuple = ()) -> None:
        if len(turns) >= opts.turn_cap:
            raise _TurnCapReached
        turns.append(Turn(role=role, text=text, call=call, attempt_trail=trail,
                          timestamp=len(turns)))

    def generate(extra_user_message: Optional[str] = None) -> str:
        prompt = render_p2(schemas, exemplar, turns)
        messages: list[tuple[str, str]] = [("system", prompt.rendered)]
        if extra_user_message is not None:
            messages.append(("user", extra_user_message))
        result = backend.generate(GenerationRequest(
            messages=tuple(messages), max_tokens=opts.max_tokens,
            model_id=backend.model_id, session_id=dialog_id))
        return result.text

    state = initial_state(goal)
    last_system_text: Optional[str] = None
    try:
        while state.phase != "done":
            if len(turns) >= opts.turn_cap:
                status = STATUS_TURN_CAP
                break
            utterance, state = next_user_turn(state, goal, last_system_text, registry)
            append("user", utterance)

            trail: list[AttemptRecord] = []
            feedback: Optional[str] = None
            while True:
                completion = generate(feedback)
                try:
                    parsed = extract_api_call(completion)
                except ParseError:
                    parsed = None
                if parsed is None:
                    append("system", completion)
                    last_system_text = completion
                    break
                call = replace(canonicalize(parsed), attempt_index=len(trail))
                verdict = validate(call, registry)
                trail.append(AttemptRecord(raw_text=completion, verdict=verdict))
                exhausted = len(trail) >= opts.max_feedback_retries + 1
                if verdict.ok or opts.no_feedback or exhausted:
                    append("api_call", serialize(call), call=call,
                           trail=tuple(trail))
                    rows = lookup_results(provider, call)
                    append("search_results", render_rows(rows))
                    state = observe_api_call(state, goal, call)
                    reply = generate()
                    append("system", reply)
                    last_system_text = reply
                    break
                feedback = feedback_message(verdict, registry)
                append("feedback", feedback)
    except StuckDialog:
        status = STATUS_STUCK
    except _TurnCapReached:
        status = STATUS_TURN_CAP
    except BackendError as exc:
        partial = DialogTranscript(
            dialog_id=dialog_id, domains=domains, turns=tuple(turns),
            config_fingerprint=config_fingerprint, status=STATUS_BACKEND_ERROR)
        raise SessionBackendError(partial, exc) from exc

    return DialogTranscript(dialog_id=dialog_id, domains=domains,
                            turns=tuple(turns),
                            config_fingerprint=config_fingerprint, status=status)
