"""Name and text normalization shared by schema lookup, validation, and metrics."""

from __future__ import annotations

import re

_WS_RUN = re.compile(r"\s+")
_PUNCT = re.compile(r"[^\w\s]")


_NAME_SEPARATORS = re.compile(r"[\s_]+")


def normalize_name(name: str) -> str:
    """Comparison form of an identifier: case-fold with spaces and
    underscores collapsed away, so GetWeather == get_weather == GET WEATHER.
    Stored names keep their source casing."""
    return _NAME_SEPARATORS.sub("", name).casefold()


def normalize_text(text: str) -> str:
    """Comparison form of free text: case-fold, punctuation stripped,
    whitespace collapsed."""
    folded = text.replace("_", " ").casefold()
    return _WS_RUN.sub(" ", _PUNCT.sub(" ", folded)).strip()


def levenshtein(a: str, b: str) -> int:
    """Classic edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def similarity(a: str, b: str) -> float:
    """Normalized edit-distance similarity: 1 - distance/max-length, computed
    on `normalize_text` forms. Two empty strings are identical (1.0)."""
    na, nb = normalize_text(a), normalize_text(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest
