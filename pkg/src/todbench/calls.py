"""API-call surface grammar: extraction from free-form generated text,
canonicalization, and canonical serialization.

Wire format (both for calls embedded in model output and for transcripts):

    APICall(method='<ident>', parameters={<entry>(, <entry>)*})
    <entry> := <key>: <value> | <key>: <op>(<value>)
    <op>    := equal_to | at_least | at_most | one_of | not

Keys and values may be bare (keys end at ':', values at ',' or '}') or
single/double-quoted; quoted strings accept backslash escapes for the quote
character and backslash itself. Whitespace around delimiters is
insignificant. one_of values are '|'-separated inside the parentheses.
The equal_to operator is elided when serializing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .errors import ParseError
from .textnorm import normalize_name

OPERATORS = ("equal_to", "at_least", "at_most", "one_of", "not")
PARSE_DEFAULT_OPERATOR = "none"

CALL_PREFIX = "APICall("
_PARSE_WINDOW = 4096

Value = Union[str, tuple]


@dataclass(frozen=True)
class ParamTriple:
    name: str
    operator: str
    value: Value  # str, or tuple of str for one_of

    def value_text(self) -> str:
        """Flat text rendering of the value ('|'-joined for one_of)."""
        if isinstance(self.value, tuple):
            return "|".join(self.value)
        return self.value


@dataclass(frozen=True)
class ApiCall:
    method: str
    params: tuple[ParamTriple, ...]
    raw_span: tuple[int, int] = (0, 0)
    attempt_index: int = 0

    def param(self, name: str) -> Optional[ParamTriple]:
        wanted = normalize_name(name)
        for triple in self.params:
            if normalize_name(triple.name) == wanted:
                return triple
        return None


class _Scanner:
    def __init__(self, text: str, pos: int, limit: int):
        self.text = text
        self.pos = pos
        self.limit = min(limit, len(text))

    def eof(self) -> bool:
        return self.pos >= self.limit

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < self.limit else ""

    def skip_ws(self) -> None:
        while self.pos < self.limit and self.text[self.pos].isspace():
            self.pos += 1

    def literal(self, token: str) -> bool:
        if self.text.startswith(token, self.pos) and self.pos + len(token) <= self.limit:
            self.pos += len(token)
            return True
        return False

    def quoted(self) -> Optional[str]:
        quote = self.peek()
        if quote not in ("'", '"'):
            return None
        self.pos += 1
        out: list[str] = []
        while self.pos < self.limit:
            ch = self.text[self.pos]
            if ch == "\\" and self.pos + 1 < self.limit:
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            if ch == quote:
                self.pos += 1
                return "".join(out)
            out.append(ch)
            self.pos += 1
        raise _Fail("unterminated quoted string")

    def bare(self, terminators: str) -> str:
        start = self.pos
        while self.pos < self.limit and self.text[self.pos] not in terminators:
            self.pos += 1
        if self.pos >= self.limit:
            raise _Fail("ran off the end looking for a terminator")
        return self.text[start:self.pos]


class _Fail(Exception):
    """Internal: this occurrence is not a well-formed call."""


_BARE_KEY_FORBIDDEN = set("{}(),'\"\n")


def _parse_key(scanner: _Scanner) -> str:
    scanner.skip_ws()
    key = scanner.quoted()
    if key is None:
        key = scanner.bare(":").strip()
        if any(ch in _BARE_KEY_FORBIDDEN for ch in key):
            raise _Fail(f"bad key {key!r}")
    else:
        key = key.strip()
    if not key:
        raise _Fail("empty key")
    return key


def _parse_operator_head(scanner: _Scanner) -> Optional[str]:
    """If the cursor sits on `<op>(`, consume through '(' and return the op."""
    for op in OPERATORS:
        mark = scanner.pos
        if scanner.literal(op):
            scanner.skip_ws()
            if scanner.literal("("):
                return op
            scanner.pos = mark
    return None


def _parse_item(scanner: _Scanner, terminators: str) -> str:
    scanner.skip_ws()
    item = scanner.quoted()
    if item is None:
        item = scanner.bare(terminators)
    item = item.strip()
    if not item:
        raise _Fail("empty value")
    return item


def _parse_entry(scanner: _Scanner) -> ParamTriple:
    key = _parse_key(scanner)
    scanner.skip_ws()
    if not scanner.literal(":"):
        raise _Fail("expected ':' after key")
    scanner.skip_ws()
    op = _parse_operator_head(scanner)
    if op is None:
        value = _parse_item(scanner, ",}")
        return ParamTriple(name=key, operator=PARSE_DEFAULT_OPERATOR, value=value)
    if op == "one_of":
        items = [_parse_item(scanner, "|)")]
        scanner.skip_ws()
        while scanner.literal("|"):
            items.append(_parse_item(scanner, "|)"))
            scanner.skip_ws()
        if not scanner.literal(")"):
            raise _Fail("expected ')' closing one_of")
        return ParamTriple(name=key, operator=op, value=tuple(items))
    value = _parse_item(scanner, ")")
    scanner.skip_ws()
    if not scanner.literal(")"):
        raise _Fail(f"expected ')' closing {op}")
    return ParamTriple(name=key, operator=op, value=value)


def _parse_call_at(text: str, start: int) -> tuple[ApiCall, int]:
    scanner = _Scanner(text, start + len(CALL_PREFIX), start + _PARSE_WINDOW)
    scanner.skip_ws()
    if not scanner.literal("method"):
        raise _Fail("expected 'method'")
    scanner.skip_ws()
    if not scanner.literal("="):
        raise _Fail("expected '=' after method")
    scanner.skip_ws()
    method = scanner.quoted()
    if method is None:
        raise _Fail("method name must be quoted")
    method = method.strip()
    if not method:
        raise _Fail("empty method name")
    scanner.skip_ws()
    if not scanner.literal(","):
        raise _Fail("expected ',' after method")
    scanner.skip_ws()
    if not scanner.literal("parameters"):
        raise _Fail("expected 'parameters'")
    scanner.skip_ws()
    if not scanner.literal("="):
        raise _Fail("expected '=' after parameters")
    scanner.skip_ws()
    if not scanner.literal("{"):
        raise _Fail("expected '{'")
    params: list[ParamTriple] = []
    seen: set[str] = set()
    scanner.skip_ws()
    if not scanner.literal("}"):
        while True:
            triple = _parse_entry(scanner)
            key = normalize_name(triple.name)
            if key in seen:
                raise _Fail(f"duplicate parameter {triple.name!r}")
            seen.add(key)
            params.append(triple)
            scanner.skip_ws()
            if scanner.literal(","):
                continue
            if scanner.literal("}"):
                break
            raise _Fail("expected ',' or '}' after entry")
    scanner.skip_ws()
    if not scanner.literal(")"):
        raise _Fail("expected ')' closing the call")
    call = ApiCall(method=method, params=tuple(params),
                   raw_span=(start, scanner.pos), attempt_index=0)
    return call, scanner.pos


def extract_api_call(system_text: str) -> Optional[ApiCall]:
    """Return the first well-formed call in the text, or None when no call
    marker is present. Raises ParseError when 'APICall(' appears but no
    occurrence completes into a well-formed call within the parse window."""
    found_marker = False
    cursor = 0
    while True:
        start = system_text.find(CALL_PREFIX, cursor)
        if start < 0:
            break
        found_marker = True
        try:
            call, _ = _parse_call_at(system_text, start)
            return call
        except _Fail:
            cursor = start + 1
    if found_marker:
        raise ParseError("text contains 'APICall(' but no well-formed completion")
    return None


def canonicalize(call: ApiCall) -> ApiCall:
    """Comparison form: default operator becomes equal_to, params sorted by
    normalized name, values trimmed, one_of items sorted case-insensitively.
    Method casing is preserved. Idempotent."""
    params = []
    for triple in call.params:
        operator = "equal_to" if triple.operator == PARSE_DEFAULT_OPERATOR else triple.operator
        if isinstance(triple.value, tuple):
            value: Value = tuple(sorted((v.strip() for v in triple.value), key=str.casefold))
        else:
            value = triple.value.strip()
        params.append(ParamTriple(name=triple.name.strip(), operator=operator, value=value))
    params.sort(key=lambda t: normalize_name(t.name))
    return replace(call, method=call.method.strip(), params=tuple(params))


_UNSAFE_CHARS = set(",{}()|'\"")


def _needs_quotes(value: str) -> bool:
    if value == "" or value != value.strip():
        return True
    if any(ch in _UNSAFE_CHARS for ch in value):
        return True
    # A bare value must not re-parse as an operator form.
    head = value.split("(", 1)[0].strip()
    return "(" in value and head in OPERATORS


def _quote(value: str) -> str:
    body = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{body}"'


def _render_value(value: str) -> str:
    return _quote(value) if _needs_quotes(value) else value


def _render_entry(triple: ParamTriple) -> str:
    key = triple.name if not _needs_quotes(triple.name) and ":" not in triple.name \
        else _quote(triple.name)
    if triple.operator in (PARSE_DEFAULT_OPERATOR, "equal_to"):
        return f"{key}: {_render_value(str(triple.value))}"
    if triple.operator == "one_of":
        items = triple.value if isinstance(triple.value, tuple) else (triple.value,)
        return f"{key}: one_of({'|'.join(_render_value(v) for v in items)})"
    return f"{key}: {triple.operator}({_render_value(str(triple.value))})"


def serialize(call: ApiCall) -> str:
    """Canonical single-line rendering; re-parsing it yields
    `canonicalize(call)`."""
    canonical = canonicalize(call)
    entries = ", ".join(_render_entry(t) for t in canonical.params)
    method = canonical.method.replace("\\", "\\\\").replace("'", "\\'")
    return f"APICall(method='{method}', parameters={{{entries}}})"


def parse_call(text: str) -> ApiCall:
    """Strict variant of `extract_api_call` for trusted stored call texts."""
    call = extract_api_call(text)
    if call is None:
        raise ParseError(f"not an API call: {text!r}")
    return call
