"""Transcript scoring: the five API-call accuracy metrics, dialog success
rate, inform accuracy, and lexical diversity (unigram Shannon entropy and
bigram conditional entropy), with single/multi-domain breakdown.

Conventions, pinned here and recorded in report metadata:

  * fuzzy matching = normalized edit-distance similarity (1 - distance /
    max-length) on case-folded, punctuation-stripped, whitespace-collapsed
    text, threshold 0.8;
  * component accuracies are micro-averaged over raw counts, never averages
    of per-dialog averages;
  * generated calls are aligned to gold calls by an order-preserving LCS
    over normalized method names; leftover generated calls count as
    hallucinated and are otherwise ignored;
  * parameter value and operator checks apply only to parameters whose name
    was matched;
  * a call is fully correct when the method, every parameter name, every
    value, and every operator match and it has no extra parameters.
"""

from __future__ import annotations

import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .calls import ApiCall, ParamTriple, canonicalize
from .errors import EmptySystemText
from .textnorm import normalize_name, similarity
from .transcript import DialogTranscript

DEFAULT_FUZZY_THRESHOLD = 0.8


@dataclass(frozen=True)
class CallScore:
    matched_gt_index: Optional[int]
    method_ok: bool
    name_hits: int
    name_total: int
    value_hits: int
    value_total: int
    operator_hits: int
    operator_total: int
    full_ok: bool


@dataclass
class DialogScore:
    dialog_id: str
    domain_class: str  # "single" | "multi"
    call_scores: list[CallScore]
    success: bool
    informed: int
    requested: int
    se_bits: Optional[float]
    ce_bits: Optional[float]
    hallucinated: int = 0


# ---------------------------------------------------------------------------
# Alignment

def align_calls(generated: Sequence[ApiCall],
                gold: Sequence[ApiCall]) -> list[tuple[Optional[int], int]]:
    """Order-preserving one-to-one alignment maximizing method-name matches.
    Among maximal alignments the lexicographically earliest (gold, gen)
    pairing wins. Returns one (gen_index or None, gold_index) per gold."""
    gen_names = [normalize_name(c.method) for c in generated]
    gold_names = [normalize_name(c.method) for c in gold]
    n, m = len(gold_names), len(gen_names)
    lcs = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if gold_names[i] == gen_names[j]:
                lcs[i][j] = 1 + lcs[i + 1][j + 1]
            else:
                lcs[i][j] = max(lcs[i + 1][j], lcs[i][j + 1])
    result: list[tuple[Optional[int], int]] = []
    j = 0
    for i in range(n):
        chosen = None
        if lcs[i][j] > 0:
            for jj in range(j, m):
                if gold_names[i] == gen_names[jj] and 1 + lcs[i + 1][jj + 1] == lcs[i][j]:
                    chosen = jj
                    break
        result.append((chosen, i))
        if chosen is not None:
            j = chosen + 1
    return result


# ---------------------------------------------------------------------------
# Per-call scoring

def _value_key(triple: ParamTriple) -> str:
    if isinstance(triple.value, tuple):
        return " ".join(triple.value)
    return triple.value


def score_call(gen: Optional[ApiCall], gold: ApiCall,
               threshold: float = DEFAULT_FUZZY_THRESHOLD,
               matched_gt_index: Optional[int] = None) -> CallScore:
    """Score one generated call against one gold call (both canonical).
    A missing generated call scores zero across the board."""
    gold = canonicalize(gold)
    name_total = len(gold.params)
    if gen is None:
        return CallScore(matched_gt_index=None, method_ok=False,
                         name_hits=0, name_total=name_total,
                         value_hits=0, value_total=0,
                         operator_hits=0, operator_total=0, full_ok=False)
    gen = canonicalize(gen)
    method_ok = normalize_name(gen.method) == normalize_name(gold.method)

    candidates = []
    for gi, gold_param in enumerate(gold.params):
        for ji, gen_param in enumerate(gen.params):
            sim = similarity(gold_param.name, gen_param.name)
            if sim >= threshold:
                candidates.append((-sim, gi, ji))
    candidates.sort()
    gold_taken: dict[int, int] = {}
    gen_taken: set[int] = set()
    for neg_sim, gi, ji in candidates:
        if gi in gold_taken or ji in gen_taken:
            continue
        gold_taken[gi] = ji
        gen_taken.add(ji)

    name_hits = len(gold_taken)
    value_hits = 0
    operator_hits = 0
    for gi, ji in gold_taken.items():
        gold_param, gen_param = gold.params[gi], gen.params[ji]
        if similarity(_value_key(gold_param), _value_key(gen_param)) >= threshold:
            value_hits += 1
        if gold_param.operator == gen_param.operator:
            operator_hits += 1
    value_total = name_hits
    operator_total = name_hits
    full_ok = (method_ok and name_hits == name_total
               and value_hits == value_total
               and operator_hits == operator_total
               and len(gen.params) == len(gold.params))
    return CallScore(matched_gt_index=matched_gt_index, method_ok=method_ok,
                     name_hits=name_hits, name_total=name_total,
                     value_hits=value_hits, value_total=value_total,
                     operator_hits=operator_hits, operator_total=operator_total,
                     full_ok=full_ok)


def score_dialog_calls(generated: Sequence[ApiCall], gold: Sequence[ApiCall],
                       threshold: float = DEFAULT_FUZZY_THRESHOLD
                       ) -> tuple[list[CallScore], int]:
    """Align then score every gold call; returns (scores, hallucinated)."""
    alignment = align_calls(generated, gold)
    scores = []
    for gen_index, gold_index in alignment:
        gen = generated[gen_index] if gen_index is not None else None
        scores.append(score_call(gen, gold[gold_index], threshold,
                                 matched_gt_index=gold_index))
    matched = sum(1 for gen_index, _ in alignment if gen_index is not None)
    return scores, len(generated) - matched


# ---------------------------------------------------------------------------
# Inform accuracy

_THOUSANDS = re.compile(r"(?<=\d),(?=\d{3}\b)")
_TRAILING_ZEROS = re.compile(r"(\d)\.0+(?!\d)")
_CURRENCY = re.compile(r"[$€£]")
_TIME_24H = re.compile(r"^([01]?\d|2[0-3]):([0-5]\d)$")


def _normalize_inform_text(text: str) -> str:
    out = _CURRENCY.sub("", text.casefold())
    out = _THOUSANDS.sub("", out)
    return _TRAILING_ZEROS.sub(r"\1", out)


def _time_variants(value: str) -> list[str]:
    match = _TIME_24H.match(value.strip())
    if not match:
        return []
    hour, minute = int(match.group(1)), match.group(2)
    suffix = "am" if hour < 12 else "pm"
    clock = hour % 12 or 12
    variants = [f"{clock}:{minute} {suffix}", f"{clock}:{minute}{suffix}"]
    if minute == "00":
        variants += [f"{clock} {suffix}", f"{clock}{suffix}", f"{clock} o'clock"]
    return variants


def _value_patterns(value: str) -> list[str]:
    forms = {value.strip(), _normalize_inform_text(value)}
    forms.update(_time_variants(value))
    return [form for form in forms if form]


def value_mentioned(value: str, system_text: str) -> bool:
    """Case-insensitive, boundary-guarded occurrence check after stripping
    currency symbols, thousands separators, and trailing '.0'; 24-hour times
    also match their 12-hour renderings."""
    haystack = _normalize_inform_text(system_text)
    for form in _value_patterns(value):
        pattern = r"(?<![A-Za-z0-9])" + re.escape(form) + r"(?![A-Za-z0-9])"
        if re.search(pattern, haystack):
            return True
    return False


def inform_accuracy(transcript: DialogTranscript,
                    gold_requests: Sequence[tuple[str, str, int]]) -> tuple[int, int]:
    """(informed, requested): a request (slot, gold_value, request_turn_index)
    counts informed when its value occurs in any system turn strictly after
    the request turn index."""
    informed = 0
    for _slot, value, request_index in gold_requests:
        hit = any(
            turn.role == "system" and index > request_index
            and value_mentioned(value, turn.text)
            for index, turn in enumerate(transcript.turns)
        )
        informed += int(hit)
    return informed, len(gold_requests)


def locate_request_turn(transcript: DialogTranscript, slot: str) -> Optional[int]:
    """Index of the first user turn that mentions the slot by name, used to
    anchor gold requests inside a freshly generated transcript."""
    surfaces = {slot.casefold(), slot.replace("_", " ").casefold()}
    for index, turn in enumerate(transcript.turns):
        if turn.role != "user":
            continue
        haystack = turn.text.casefold()
        for surface in surfaces:
            if re.search(r"(?<!\w)" + re.escape(surface) + r"(?!\w)", haystack):
                return index
    return None


# ---------------------------------------------------------------------------
# Lexical diversity

_PUNCT_TOKEN = re.compile(r"([^\w\s])")


def tokenize(text: str) -> list[str]:
    """Case-fold, detach punctuation into standalone tokens, split on
    whitespace."""
    return _PUNCT_TOKEN.sub(r" \1 ", text.casefold()).split()


def shannon_entropy(tokens: Sequence[str]) -> float:
    if not tokens:
        return 0.0
    counts = Counter(tokens)
    total = len(tokens)
    return -sum((c / total) * math.log2(c / total) for c in counts.values())


def bigram_conditional_entropy(tokens: Sequence[str]) -> float:
    if len(tokens) < 2:
        return 0.0
    joint = Counter(zip(tokens, tokens[1:]))
    left = Counter(tokens[:-1])
    total = len(tokens) - 1
    return -sum((count / total) * math.log2(count / left[w1])
                for (w1, _w2), count in joint.items())


def diversity(transcript: DialogTranscript) -> tuple[float, float]:
    """(SE, CE) in bits over the concatenation of the system turns."""
    system_turns = transcript.system_turns()
    if not system_turns:
        raise EmptySystemText(f"dialog {transcript.dialog_id} has no system turns")
    tokens = tokenize(" ".join(turn.text for turn in system_turns))
    return shannon_entropy(tokens), bigram_conditional_entropy(tokens)


# ---------------------------------------------------------------------------
# Aggregation

@dataclass
class ClassAggregate:
    dialogs: int = 0
    successes: int = 0
    gold_calls: int = 0
    method_hits: int = 0
    full_hits: int = 0
    name_hits: int = 0
    name_total: int = 0
    value_hits: int = 0
    value_total: int = 0
    operator_hits: int = 0
    operator_total: int = 0
    informed: int = 0
    requested: int = 0
    hallucinated: int = 0
    se_values: list = field(default_factory=list)
    ce_values: list = field(default_factory=list)

    def add(self, score: DialogScore) -> None:
        self.dialogs += 1
        self.successes += int(score.success)
        self.hallucinated += score.hallucinated
        self.informed += score.informed
        self.requested += score.requested
        for call in score.call_scores:
            self.gold_calls += 1
            self.method_hits += int(call.method_ok)
            self.full_hits += int(call.full_ok)
            self.name_hits += call.name_hits
            self.name_total += call.name_total
            self.value_hits += call.value_hits
            self.value_total += call.value_total
            self.operator_hits += call.operator_hits
            self.operator_total += call.operator_total
        if score.se_bits is not None:
            self.se_values.append(score.se_bits)
        if score.ce_bits is not None:
            self.ce_values.append(score.ce_bits)

    def merge(self, other: "ClassAggregate") -> None:
        for name in ("dialogs", "successes", "gold_calls", "method_hits",
                     "full_hits", "name_hits", "name_total", "value_hits",
                     "value_total", "operator_hits", "operator_total",
                     "informed", "requested", "hallucinated"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.se_values.extend(other.se_values)
        self.ce_values.extend(other.ce_values)

    def metrics(self, operator_applicable: bool) -> dict:
        def ratio(hits: int, total: int) -> Optional[float]:
            return hits / total if total else None

        return {
            "dialogs": self.dialogs,
            "gold_calls": self.gold_calls,
            "hallucinated_calls": self.hallucinated,
            "method_accuracy": ratio(self.method_hits, self.gold_calls),
            "param_name_accuracy": ratio(self.name_hits, self.name_total),
            "param_value_accuracy": ratio(self.value_hits, self.value_total),
            "operator_accuracy": (ratio(self.operator_hits, self.operator_total)
                                  if operator_applicable else None),
            "full_api_accuracy": ratio(self.full_hits, self.gold_calls),
            "dialog_success_rate": ratio(self.successes, self.dialogs),
            "inform_accuracy": ratio(self.informed, self.requested),
            "mean_se_bits": (sum(self.se_values) / len(self.se_values)
                             if self.se_values else None),
            "mean_ce_bits": (sum(self.ce_values) / len(self.ce_values)
                             if self.ce_values else None),
        }


@dataclass
class EvalReport:
    single: dict
    multi: dict
    both: dict
    success_by_call_count: dict  # n_calls -> {"dialogs", "successes", "rate"}
    metadata: dict

    def to_document(self) -> dict:
        return {
            "single": self.single,
            "multi": self.multi,
            "both": self.both,
            "success_by_call_count": {
                str(k): v for k, v in sorted(self.success_by_call_count.items())
            },
            "metadata": self.metadata,
        }


def aggregate(dialog_scores: Sequence[DialogScore],
              operator_applicable: Optional[bool] = None,
              fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD) -> EvalReport:
    """Micro-averaged corpus report. "both" is recomputed from the raw
    single+multi counts; SE/CE are macro-averaged at the dialog level."""
    per_class = {"single": ClassAggregate(), "multi": ClassAggregate()}
    histogram: dict[int, dict] = {}
    for score in dialog_scores:
        per_class[score.domain_class].add(score)
        cell = histogram.setdefault(len(score.call_scores),
                                    {"dialogs": 0, "successes": 0})
        cell["dialogs"] += 1
        cell["successes"] += int(score.success)
    for cell in histogram.values():
        cell["rate"] = cell["successes"] / cell["dialogs"]
    both = ClassAggregate()
    both.merge(per_class["single"])
    both.merge(per_class["multi"])
    if operator_applicable is None:
        operator_applicable = False
    return EvalReport(
        single=per_class["single"].metrics(operator_applicable),
        multi=per_class["multi"].metrics(operator_applicable),
        both=both.metrics(operator_applicable),
        success_by_call_count=histogram,
        metadata={
            "fuzzy_threshold": fuzzy_threshold,
            "averaging": "micro",
            "alignment": "lcs-method-names",
            "operator_applicable": operator_applicable,
        },
    )


def gold_has_operators(gold_calls: Sequence[ApiCall]) -> bool:
    return any(
        triple.operator not in ("none", "equal_to")
        for call in gold_calls for triple in call.params
    )


# ---------------------------------------------------------------------------
# Success-rate-vs-call-count trend harness

def simulated_success_trend(p_values: Sequence[float], call_counts: Sequence[int],
                            dialogs_per_cell: int, seed: int,
                            method_pool: Sequence[str] = ("AlphaTask", "BetaTask",
                                                          "GammaTask", "DeltaTask",
                                                          "EpsilonTask")
                            ) -> list[dict]:
    """Synthesize dialogs whose calls independently match gold with
    probability p, score them through the real pipeline, and report the
    measured success rate per (p, n) cell against the p**n expectation."""
    rng = random.Random(seed)
    rows = []
    for p in p_values:
        for n_calls in call_counts:
            scores = []
            for index in range(dialogs_per_cell):
                gold = [ApiCall(method=method_pool[k % len(method_pool)],
                                params=(ParamTriple("item", "equal_to", f"v{k}"),))
                        for k in range(n_calls)]
                generated = []
                for call in gold:
                    if rng.random() < p:
                        generated.append(call)
                    else:
                        generated.append(ApiCall(method=call.method + "Zz",
                                                 params=call.params))
                call_scores, hallucinated = score_dialog_calls(generated, gold)
                scores.append(DialogScore(
                    dialog_id=f"trend-{p}-{n_calls}-{index}",
                    domain_class="single" if n_calls == 1 else "multi",
                    call_scores=call_scores,
                    success=all(s.full_ok for s in call_scores),
                    informed=0, requested=0, se_bits=None, ce_bits=None,
                    hallucinated=hallucinated))
            report = aggregate(scores)
            measured = report.success_by_call_count[n_calls]["rate"]
            rows.append({"p": p, "n_calls": n_calls,
                         "expected": p ** n_calls, "measured": measured,
                         "dialogs": dialogs_per_cell})
    return rows
