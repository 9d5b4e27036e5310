"""Dialog transcripts: the turn record produced by the orchestrator and the
JSON-lines persistence that connects `run` to `score`.

File layout: one JSON object per line. Each dialog starts with a header line
(no "role" key) carrying dialog-level fields, followed by one line per turn:

    {"dialog_id": ..., "domains": [...], "config_fingerprint": ..., "status": ...}
    {"dialog_id": ..., "role": "user", "text": ..., "call": null,
     "attempt_trail": [], "timestamp": 0}

Roles: user, system, api_call, feedback, search_results. The top-level
conversation alternates user/system; api_call, feedback, and search_results
turns nest inside a system step. Feedback turns are backend-internal: they
are never shown to the simulator and never count as metric text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .calls import ApiCall, parse_call, serialize
from .errors import MalformedDocument
from .validator import ValidationError, ValidationVerdict

ROLES = ("user", "system", "api_call", "feedback", "search_results")

STATUS_COMPLETE = "complete"
STATUS_STUCK = "stuck"
STATUS_TURN_CAP = "turn_cap"
STATUS_BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class AttemptRecord:
    raw_text: str
    verdict: ValidationVerdict


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    call: Optional[ApiCall] = None
    attempt_trail: tuple[AttemptRecord, ...] = ()
    timestamp: int = 0


@dataclass(frozen=True)
class DialogTranscript:
    dialog_id: str
    domains: tuple[str, ...]
    turns: tuple[Turn, ...] = ()
    config_fingerprint: str = ""
    status: str = STATUS_COMPLETE

    def with_turn(self, turn: Turn) -> "DialogTranscript":
        return replace(self, turns=self.turns + (turn,))

    def system_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == "system"]

    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == "user"]

    def api_calls(self) -> list[ApiCall]:
        return [t.call for t in self.turns if t.role == "api_call" and t.call]

    def feedback_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.role == "feedback"]


def render_history_lines(turns: Iterable[Turn]) -> list[str]:
    """Turns as prompt-visible lines. Feedback turns are omitted; calls and
    search results keep their standalone line formats."""
    lines = []
    for turn in turns:
        if turn.role == "user":
            lines.append(f"User: {turn.text}")
        elif turn.role == "system":
            lines.append(f"System: {turn.text}")
        elif turn.role == "api_call" and turn.call is not None:
            lines.append(serialize(turn.call))
        elif turn.role == "search_results":
            lines.append(f"Search Results: {turn.text}")
    return lines


def _verdict_to_doc(verdict: ValidationVerdict) -> dict:
    return {
        "ok": verdict.ok,
        "errors": [
            {"kind": e.kind, "method": e.method,
             "offending_names": list(e.offending_names),
             "suggestions": list(e.suggestions)}
            for e in verdict.errors
        ],
    }


def _verdict_from_doc(doc: dict) -> ValidationVerdict:
    errors = tuple(
        ValidationError(kind=e["kind"], method=e["method"],
                        offending_names=tuple(e["offending_names"]),
                        suggestions=tuple(e["suggestions"]))
        for e in doc["errors"]
    )
    return ValidationVerdict(ok=doc["ok"], errors=errors)


def _turn_to_line(dialog_id: str, turn: Turn) -> dict:
    return {
        "dialog_id": dialog_id,
        "role": turn.role,
        "text": turn.text,
        "call": serialize(turn.call) if turn.call is not None else None,
        "attempt_trail": [
            {"raw": a.raw_text, "verdict": _verdict_to_doc(a.verdict)}
            for a in turn.attempt_trail
        ],
        "timestamp": turn.timestamp,
    }


def _turn_from_line(doc: dict) -> Turn:
    call = parse_call(doc["call"]) if doc.get("call") else None
    trail = tuple(
        AttemptRecord(raw_text=a["raw"], verdict=_verdict_from_doc(a["verdict"]))
        for a in doc.get("attempt_trail", [])
    )
    return Turn(role=doc["role"], text=doc["text"], call=call,
                attempt_trail=trail, timestamp=doc.get("timestamp", 0))


def dump_transcripts(transcripts: Iterable[DialogTranscript]) -> str:
    lines = []
    for transcript in transcripts:
        header = {
            "dialog_id": transcript.dialog_id,
            "domains": list(transcript.domains),
            "config_fingerprint": transcript.config_fingerprint,
            "status": transcript.status,
        }
        lines.append(json.dumps(header, ensure_ascii=False))
        for turn in transcript.turns:
            lines.append(json.dumps(_turn_to_line(transcript.dialog_id, turn),
                                    ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def write_transcripts(path, transcripts: Iterable[DialogTranscript]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dump_transcripts(transcripts))


def load_transcripts(path) -> list[DialogTranscript]:
    transcripts: list[DialogTranscript] = []
    current: Optional[DialogTranscript] = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{line_no}: not JSON: {exc}") from exc
            if "role" not in doc:
                current = DialogTranscript(
                    dialog_id=doc["dialog_id"], domains=tuple(doc["domains"]),
                    config_fingerprint=doc.get("config_fingerprint", ""),
                    status=doc.get("status", STATUS_COMPLETE))
                transcripts.append(current)
                continue
            if current is None or doc["dialog_id"] != current.dialog_id:
                raise MalformedDocument(
                    f"{path}:{line_no}: turn line without matching dialog header")
            transcripts[-1] = current = current.with_turn(_turn_from_line(doc))
    return transcripts
