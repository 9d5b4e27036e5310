"""Glue between transcripts, the corpus, and the metric suite: score a full
run and produce the EvalReport."""

from __future__ import annotations

from typing import Sequence

from .corpus import Corpus, CorpusItem
from .errors import EmptySystemText, TodbenchError
from .metrics import (
    DEFAULT_FUZZY_THRESHOLD,
    DialogScore,
    EvalReport,
    aggregate,
    diversity,
    gold_has_operators,
    inform_accuracy,
    locate_request_turn,
    score_dialog_calls,
)
from .transcript import DialogTranscript


class CorpusMismatch(TodbenchError):
    """Transcript dialog ids do not line up with the corpus."""


def anchor_requests(item: CorpusItem,
                    transcript: DialogTranscript) -> list[tuple[str, str, int]]:
    """Re-anchor gold requests to the scored transcript: the request turn is
    the first user turn mentioning the slot, falling back to the stored gold
    index when the user never asked."""
    anchored = []
    for slot, value, stored_index in item.gold_requests:
        located = locate_request_turn(transcript, slot)
        anchored.append((slot, value,
                         located if located is not None else stored_index))
    return anchored


def score_transcript(item: CorpusItem, transcript: DialogTranscript,
                     threshold: float = DEFAULT_FUZZY_THRESHOLD) -> DialogScore:
    call_scores, hallucinated = score_dialog_calls(
        transcript.api_calls(), item.gold_calls, threshold)
    informed, requested = inform_accuracy(
        transcript, anchor_requests(item, transcript))
    try:
        se_bits, ce_bits = diversity(transcript)
    except EmptySystemText:
        se_bits = ce_bits = None
    return DialogScore(
        dialog_id=item.dialog_id, domain_class=item.domain_class,
        call_scores=call_scores,
        success=all(score.full_ok for score in call_scores),
        informed=informed, requested=requested,
        se_bits=se_bits, ce_bits=ce_bits, hallucinated=hallucinated)


def score_run(corpus: Corpus, transcripts: Sequence[DialogTranscript],
              threshold: float = DEFAULT_FUZZY_THRESHOLD,
              ) -> tuple[EvalReport, list[DialogScore]]:
    """Score every transcript against its corpus item by dialog id."""
    if not transcripts:
        raise CorpusMismatch("no transcripts to score")
    by_id = {item.dialog_id: item for item in corpus.items}
    scores: list[DialogScore] = []
    for transcript in transcripts:
        item = by_id.get(transcript.dialog_id)
        if item is None:
            raise CorpusMismatch(
                f"transcript {transcript.dialog_id!r} has no corpus item")
        scores.append(score_transcript(item, transcript, threshold))
    operator_applicable = gold_has_operators(
        [call for item in corpus.items for call in item.gold_calls])
    report = aggregate(scores, operator_applicable=operator_applicable,
                       fuzzy_threshold=threshold)
    return report, scores
