"""Schema validation of parsed API calls and the targeted correction
feedback sent back to the generation backend.

Three error kinds are detected, in this order:

  UnknownMethod       the method resolves to no registered intent
  UnknownSlot         a parameter is not among the intent's required+optional slots
  MissingRequiredSlot a required slot of the intent is absent

UnknownMethod short-circuits the slot checks. Parameter values and operators
are never validated here; that is the metrics layer's concern.

Feedback message templates (pinned by golden tests; keep byte-stable):

  Your API call is not valid for the provided schemas. Problems found:
  - unknown method "{method}"[; closest valid methods: {a}, {b}, {c}]
  - unknown parameter "{name}" for method "{method}"[; did you mean: {a}, {b}, {c}]
  - required parameter "{name}" is missing for method "{method}"
  Please re-emit the corrected call on a single line in the same format: \
APICall(method='<method>', parameters={<name>: <value>, ...}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .calls import ApiCall
from .errors import ContractViolation
from .schema import IntentDef, SchemaRegistry, resolve_intent
from .textnorm import levenshtein, normalize_name

UNKNOWN_METHOD = "UnknownMethod"
UNKNOWN_SLOT = "UnknownSlot"
MISSING_REQUIRED_SLOT = "MissingRequiredSlot"

_MAX_SUGGESTIONS = 3
_MAX_SUGGESTION_DISTANCE = 3


@dataclass(frozen=True)
class ValidationError:
    kind: str
    method: str
    offending_names: tuple[str, ...] = ()
    suggestions: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationVerdict:
    ok: bool
    errors: tuple[ValidationError, ...] = field(default=())


def _nearest(name: str, candidates: list[str]) -> tuple[str, ...]:
    scored = []
    for candidate in candidates:
        distance = levenshtein(normalize_name(name), normalize_name(candidate))
        if 0 < distance <= _MAX_SUGGESTION_DISTANCE:
            scored.append((distance, candidate))
    scored.sort(key=lambda pair: (pair[0], pair[1]))
    return tuple(candidate for _, candidate in scored[:_MAX_SUGGESTIONS])


def _intent_slot_names(intent: IntentDef) -> list[str]:
    return list(intent.required_slots) + list(intent.optional_slots)


def validate(call: ApiCall, registry: SchemaRegistry) -> ValidationVerdict:
    """Check a canonicalized call against the registry. All violations are
    reported as data; this never raises for an invalid call."""
    resolved = resolve_intent(registry, call.method)
    if resolved is None:
        all_intents = [intent.name for schema in registry.domains for intent in schema.intents]
        error = ValidationError(kind=UNKNOWN_METHOD, method=call.method,
                                suggestions=_nearest(call.method, all_intents))
        return ValidationVerdict(ok=False, errors=(error,))

    _, intent = resolved
    known = {normalize_name(s) for s in _intent_slot_names(intent)}
    errors: list[ValidationError] = []
    for triple in call.params:
        if normalize_name(triple.name) not in known:
            errors.append(ValidationError(
                kind=UNKNOWN_SLOT, method=call.method,
                offending_names=(triple.name,),
                suggestions=_nearest(triple.name, _intent_slot_names(intent))))
    present = {normalize_name(t.name) for t in call.params}
    for slot_name in intent.required_slots:
        if normalize_name(slot_name) not in present:
            errors.append(ValidationError(
                kind=MISSING_REQUIRED_SLOT, method=call.method,
                offending_names=(slot_name,)))
    return ValidationVerdict(ok=not errors, errors=tuple(errors))


_HEADER = "Your API call is not valid for the provided schemas. Problems found:"
_FOOTER = ("Please re-emit the corrected call on a single line in the same "
           "format: APICall(method='<method>', parameters={<name>: <value>, ...}).")


def _error_line(error: ValidationError) -> str:
    if error.kind == UNKNOWN_METHOD:
        line = f'- unknown method "{error.method}"'
        if error.suggestions:
            line += "; closest valid methods: " + ", ".join(error.suggestions)
        return line
    if error.kind == UNKNOWN_SLOT:
        name = error.offending_names[0]
        line = f'- unknown parameter "{name}" for method "{error.method}"'
        if error.suggestions:
            line += "; did you mean: " + ", ".join(error.suggestions)
        return line
    name = error.offending_names[0]
    return f'- required parameter "{name}" is missing for method "{error.method}"'


def feedback_message(verdict: ValidationVerdict, registry: SchemaRegistry) -> str:
    """Deterministic correction prompt for a failing verdict."""
    if verdict.ok:
        raise ContractViolation("feedback_message called with a passing verdict")
    lines = [_HEADER]
    lines.extend(_error_line(error) for error in verdict.errors)
    lines.append(_FOOTER)
    return "\n".join(lines)
