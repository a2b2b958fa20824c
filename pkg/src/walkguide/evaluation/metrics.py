"""Lexical overlap metrics, word counts and go/stop accuracy."""

from __future__ import annotations

import math
import re
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from ..errors import EvaluationError
from ..labels import parse_reco_label

_EDGE_PUNCT = "\"'()[]{}.,;:!?"


def tokenize(text: str) -> list[str]:
    """Lowercased whitespace tokens with edge punctuation removed."""
    out = []
    for tok in text.lower().split():
        tok = tok.strip(_EDGE_PUNCT)
        if tok:
            out.append(tok)
    return out


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """LCS F-measure with equal weight on precision and recall."""
    c, r = tokenize(candidate), tokenize(reference)
    lcs = lcs_length(c, r)
    if lcs == 0:
        return 0.0
    p, rec = lcs / len(c), lcs / len(r)
    return 2 * p * rec / (p + rec)


_SUFFIXES = ("ingly", "edly", "ing", "ed", "es", "ly", "s")


def stem(token: str) -> str:
    for suf in _SUFFIXES:
        if token.endswith(suf) and len(token) - len(suf) >= 3:
            return token[: -len(suf)]
    return token


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Unigram alignment: exact matches first, then stem matches.

    Each candidate token takes the unused reference position that extends the
    previous match when possible, else the leftmost one, which keeps the chunk
    count low without a full search.
    """
    used: set[int] = set()
    pairs: dict[int, int] = {}
    for key in (lambda t: t, stem):
        keyed_ref = [key(t) for t in ref]
        prev_j = None
        for i, t in enumerate(cand):
            if i in pairs:
                prev_j = pairs[i]
                continue
            k = key(t)
            options = [j for j, rt in enumerate(keyed_ref) if rt == k and j not in used]
            if not options:
                prev_j = None
                continue
            j = prev_j + 1 if prev_j is not None and prev_j + 1 in options else options[0]
            pairs[i] = j
            used.add(j)
            prev_j = j
    return sorted(pairs.items())


def count_chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or not (i == prev[0] + 1 and j == prev[1] + 1):
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(candidate: str, reference: str, alpha: float = 0.9, beta: float = 3.0,
                gamma: float = 0.5) -> float:
    """METEOR without synonym tables: exact and suffix-stem unigram matches.

    ``F = PR / (alpha P + (1 - alpha) R)``, fragmentation penalty
    ``gamma (chunks / matches) ** beta``.
    """
    c, r = tokenize(candidate), tokenize(reference)
    pairs = _align(c, r)
    m = len(pairs)
    if m == 0:
        return 0.0
    p, rec = m / len(c), m / len(r)
    f_mean = p * rec / (alpha * p + (1 - alpha) * rec)
    penalty = gamma * (count_chunks(pairs) / m) ** beta
    return f_mean * (1 - penalty)


def word_count(text: str) -> int:
    return len(text.split())


def embedding_f1(candidate: str, reference: str, embed: Callable[[Sequence[str]], np.ndarray]) -> float:
    """Greedy token matching on cosine similarity of embedded tokens."""
    c, r = tokenize(candidate), tokenize(reference)
    if not c or not r:
        return 0.0
    vecs = np.asarray(embed(c + r), dtype=float)
    vecs /= np.maximum(np.linalg.norm(vecs, axis=1, keepdims=True), 1e-12)
    sim = vecs[: len(c)] @ vecs[len(c):].T
    p, rec = float(sim.max(axis=1).mean()), float(sim.max(axis=0).mean())
    return 0.0 if p + rec <= 0 else 2 * p * rec / (p + rec)


def go_stop_accuracy(predictions: Mapping[str, str] | Iterable, references: Iterable) -> float:
    """Share of scenes whose predicted recommendation label equals the reference label.

    ``predictions`` maps scene ids to recommendation texts (or is an iterable
    of prediction records); ``unknown`` never counts as correct.
    """
    if not isinstance(predictions, Mapping):
        predictions = {p.scene_id: p.descriptions.t_reco for p in predictions}
    refs = {r.scene_id: r.passable for r in references}
    unmatched = sorted(set(predictions) - set(refs))
    if unmatched:
        raise EvaluationError(f"predictions without a benchmark record: {unmatched[:5]}",
                              code="unmatched-scene")
    if not predictions:
        return math.nan
    hits = sum(parse_reco_label(text) == refs[sid] for sid, text in predictions.items())
    return hits / len(predictions)


_RATING_RE = re.compile(r"\[\[\s*(\d+)\s*\]\]")


def parse_rating(text: str) -> int | None:
    """Integer from the last ``[[n]]`` in ``text``; None when absent or outside 1..10."""
    found = _RATING_RE.findall(text or "")
    if not found:
        return None
    n = int(found[-1])
    return n if 1 <= n <= 10 else None
