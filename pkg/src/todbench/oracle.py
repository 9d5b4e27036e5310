"""Offline oracle profile: replay-backend scripts derived from corpus items.

The builders mirror the scripted simulator's reveal policy (required slots
first, at most two per turn) so that a session driven by the generated script
plays out deterministically: ask turns for the not-yet-volunteered slots, the
gold call, a confirmation reply, one answer per request slot, and a farewell.

`correction_script` variants commit one schema error on the first call
attempt and supply the corrected call next, which the feedback loop turns
into a single retry; without feedback the bad call stands.
"""

from __future__ import annotations

import re
from dataclasses import replace
from typing import Optional

from .backends import ReplayBackend
from .calls import ApiCall, ParamTriple, serialize
from .corpus import Corpus, CorpusItem
from .prompts import exemplar_session_id
from .schema import SchemaRegistry, resolve_intent
from .session import render_rows
from .textnorm import normalize_name

FAREWELL = "You're welcome. Have a great day!"
FILLER = "Is there anything else I can help with today?"
_SLOTS_PER_TURN = 2


def _words(name: str) -> str:
    return re.sub(r"(?<=[a-z0-9])(?=[A-Z])", " ", name).replace("_", " ").lower()


def _rows_for(item: CorpusItem, method: str, occurrence: int) -> list[dict]:
    wanted = (normalize_name(method), occurrence)
    for (intent, occ), rows in item.replay_results.items():
        if (normalize_name(intent), occ) == wanted:
            return rows
    return []


def _ordered_params(call: ApiCall, registry: SchemaRegistry) -> list[ParamTriple]:
    resolved = resolve_intent(registry, call.method)
    required: set[str] = set()
    if resolved is not None:
        required = {normalize_name(s) for s in resolved[1].required_slots}
    ordered = list(call.params)
    ordered.sort(key=lambda t: 0 if normalize_name(t.name) in required else 1)
    return ordered


def _ask_text(chunk: list[ParamTriple]) -> str:
    names = [f"the {_words(t.name)}" for t in chunk]
    return f"Could you tell me {' and '.join(names)}?"


def _post_reply(call: ApiCall) -> str:
    return f"All set. I have completed the {call.method} request for you."


def oracle_entries(item: CorpusItem, registry: SchemaRegistry,
                   corrupt_goal: Optional[int] = None,
                   corrupted_call: Optional[ApiCall] = None) -> list[str]:
    """Scripted completions for one session, in generation order. When
    `corrupt_goal` is set, that goal's call is first emitted as
    `corrupted_call` and then corrected."""
    entries: list[str] = []
    consumed: set[int] = set()

    def answer_text(slot: str) -> str:
        # Requests are consumed in goal order, matching the stored order.
        for index, (name, value, _) in enumerate(item.gold_requests):
            if index not in consumed and normalize_name(name) == normalize_name(slot):
                consumed.add(index)
                return f"The {_words(slot)} is {value}."
        return f"The {_words(slot)} is not available."

    for goal_index, call in enumerate(item.goal.goal_calls):
        ordered = _ordered_params(call, registry)
        chunks = [ordered[i:i + _SLOTS_PER_TURN]
                  for i in range(0, len(ordered), _SLOTS_PER_TURN)]
        for chunk in chunks[1:]:
            entries.append(_ask_text(chunk))
        if goal_index == corrupt_goal and corrupted_call is not None:
            entries.append(serialize(corrupted_call))
        entries.append(serialize(call))
        entries.append(_post_reply(call))
        for slot in item.goal.request_slots.get(goal_index, ()):
            entries.append(answer_text(slot))
    entries.append(FAREWELL)
    return entries


def exemplar_completion(item: CorpusItem, registry: SchemaRegistry) -> str:
    """A stage-1 completion for the item's domain set: a short alternating
    dialog containing one validated call."""
    call = item.goal.goal_calls[0]
    reveals = " ".join(
        f"The {_words(t.name)} is {t.value_text()}."
        for t in _ordered_params(call, registry))
    rows = _rows_for(item, call.method, 0)
    lines = [
        f"User: Hello! I need some help with {', '.join(item.domains)}.",
        "System: Of course. What would you like to do first?",
        f"User: I'm looking to {_words(call.method)}. {reveals}",
        serialize(call),
        f"Search Results: {render_rows(rows)}",
        "System: Done! Everything is confirmed. Anything else?",
        "User: No, that's everything. Thank you!",
        "System: You're welcome. Have a great day!",
    ]
    return "\n".join(lines)


def build_oracle_backend(corpus: Corpus,
                         include_exemplars: bool = True) -> ReplayBackend:
    """Replay backend scripted from every corpus item's gold data, plus one
    stage-1 completion per distinct domain set."""
    sequences: dict[str, list[str]] = {}
    for item in corpus.items:
        sequences[item.dialog_id] = oracle_entries(item, corpus.registry)
    if include_exemplars:
        seen: set[str] = set()
        for item in corpus.items:
            session = exemplar_session_id(item.domains)
            if session in seen:
                continue
            seen.add(session)
            sequences[session] = [exemplar_completion(item, corpus.registry)]
    return ReplayBackend.from_sequences(sequences, model_id="oracle-replay")


# ---------------------------------------------------------------------------
# Self-correcting scripts for the feedback-loop checks

def corrupt_unknown_method(call: ApiCall) -> ApiCall:
    return replace(call, method=call.method + "Zz")


def corrupt_unknown_slot(call: ApiCall) -> ApiCall:
    # A far-off name: rejected by exact validation AND by fuzzy metric
    # matching, so the ablation shows up in Full API Accuracy.
    first = call.params[0]
    renamed = ParamTriple(name="wrong_field_name", operator=first.operator,
                          value=first.value)
    return replace(call, params=(renamed,) + call.params[1:])


def corrupt_missing_required(call: ApiCall,
                             registry: SchemaRegistry) -> ApiCall:
    resolved = resolve_intent(registry, call.method)
    required = {normalize_name(s) for s in resolved[1].required_slots} \
        if resolved else set()
    for index, triple in enumerate(call.params):
        if normalize_name(triple.name) in required:
            return replace(call,
                           params=call.params[:index] + call.params[index + 1:])
    return replace(call, params=call.params[1:])


CORRUPTIONS = {
    "UnknownMethod": lambda call, registry: corrupt_unknown_method(call),
    "UnknownSlot": lambda call, registry: corrupt_unknown_slot(call),
    "MissingRequiredSlot": corrupt_missing_required,
}


def correction_entries(item: CorpusItem, registry: SchemaRegistry,
                       error_kind: str, padding: int = 8) -> list[str]:
    """Script committing one `error_kind` mistake on the first goal call and
    correcting it on the next generation. Padding keeps a no-feedback run
    supplied with replies until the simulator gives up."""
    gold = item.goal.goal_calls[0]
    corrupted = CORRUPTIONS[error_kind](gold, registry)
    entries = oracle_entries(item, registry, corrupt_goal=0,
                             corrupted_call=corrupted)
    return entries + [FILLER] * padding


def build_correction_backend(corpus: Corpus, assignments: dict[str, str],
                             include_exemplars: bool = True) -> ReplayBackend:
    """`assignments` maps dialog_id -> error kind for the sessions that
    should misbehave once; other corpus items are not scripted."""
    sequences: dict[str, list[str]] = {}
    for dialog_id, kind in assignments.items():
        item = corpus.item(dialog_id)
        sequences[dialog_id] = correction_entries(item, corpus.registry, kind)
        if include_exemplars:
            session = exemplar_session_id(item.domains)
            sequences.setdefault(session,
                                 [exemplar_completion(item, corpus.registry)])
    return ReplayBackend.from_sequences(sequences, model_id="correction-replay")
