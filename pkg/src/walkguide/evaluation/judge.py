"""Reference-guided LLM judging and run-level aggregation."""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..descriptions import ANSWER_SLOTS, Prediction
from ..errors import EvaluationError
from ..gateway import ChatRequest
from ..prompts import render_judge_prompts
from ..scene import BenchRecord
from .metrics import embedding_f1, go_stop_accuracy, meteor_lite, parse_rating, rouge_l, word_count

log = logging.getLogger(__name__)

CATEGORIES = ANSWER_SLOTS
DEFAULT_JUDGE_MODEL = "gpt-4o"


@dataclass(frozen=True)
class JudgeVerdict:
    explanation: str
    rating: int | None
    judge_model_id: str
    latency_s: float = 0.0
    attempts: int = 1

    def __post_init__(self):
        if self.rating is not None and not 1 <= self.rating <= 10:
            raise EvaluationError(f"rating {self.rating} outside 1..10", code="bad-rating")


def judge_description(reference: str, assistant: str, gateway, model_id: str = DEFAULT_JUDGE_MODEL,
                      extra_attempts: int = 2, max_tokens: int = 1024) -> JudgeVerdict:
    """Rate ``assistant`` against ``reference``; unparseable answers are re-asked without the cache."""
    if not reference.strip() or not assistant.strip():
        raise EvaluationError("judging needs a reference and a candidate text", code="empty-text")
    system, user = render_judge_prompts(reference.strip(), assistant.strip())
    request = ChatRequest.single(system, user, None, model_id, max_tokens=max_tokens)
    latency = 0.0
    text = ""
    for attempt in range(1 + extra_attempts):
        resp = gateway.complete(request, use_cache=attempt == 0)
        latency += resp.latency_s
        text = resp.text
        rating = parse_rating(text)
        if rating is not None:
            return JudgeVerdict(text, rating, model_id, latency, attempt + 1)
        log.warning("judge answer without a rating (attempt %d): %.80r", attempt + 1, text)
    return JudgeVerdict(text, None, model_id, latency, 1 + extra_attempts)


@dataclass
class EvalConfig:
    judge_model_id: str = DEFAULT_JUDGE_MODEL
    metrics_only: bool = False
    workers: int = 4
    embed: Callable[[Sequence[str]], np.ndarray] | None = None
    label: str | None = None


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


@dataclass
class EvalReport:
    backend_id: str
    category_means: dict[str, float | None]
    words_mean: float | None
    inference_time_s: float | None
    go_stop_accuracy: float | None
    metric_means: dict[str, float | None]
    n_scenes: int = 0
    judged: int = 0
    present: int = 0
    missing: int = 0
    judge_model_id: str | None = None
    scores: dict[str, dict[str, int | None]] = field(default_factory=dict)

    @property
    def average(self) -> float | None:
        """Mean of the five category means; undefined while any category has no rating."""
        vals = [self.category_means.get(c) for c in CATEGORIES]
        if any(v is None for v in vals):
            return None
        return math.fsum(vals) / len(vals)

    def to_dict(self) -> dict:
        return {"backend_id": self.backend_id, "category_means": self.category_means,
                "average": self.average, "words_mean": self.words_mean,
                "inference_time_s": self.inference_time_s, "go_stop_accuracy": self.go_stop_accuracy,
                "metric_means": self.metric_means, "n_scenes": self.n_scenes, "judged": self.judged,
                "present": self.present, "missing": self.missing, "judge_model_id": self.judge_model_id,
                "scores": self.scores}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(backend_id=d["backend_id"], category_means=dict(d["category_means"]),
                   words_mean=d.get("words_mean"), inference_time_s=d.get("inference_time_s"),
                   go_stop_accuracy=d.get("go_stop_accuracy"), metric_means=dict(d.get("metric_means", {})),
                   n_scenes=d.get("n_scenes", 0), judged=d.get("judged", 0), present=d.get("present", 0),
                   missing=d.get("missing", 0), judge_model_id=d.get("judge_model_id"),
                   scores=dict(d.get("scores", {})))


def match_predictions(predictions: Sequence[Prediction],
                      bench: Sequence[BenchRecord]) -> list[tuple[Prediction, BenchRecord]]:
    refs = {r.scene_id: r for r in bench}
    seen: set[str] = set()
    unmatched, dupes = [], []
    for p in predictions:
        if p.scene_id not in refs:
            unmatched.append(p.scene_id)
        if p.scene_id in seen:
            dupes.append(p.scene_id)
        seen.add(p.scene_id)
    if unmatched:
        raise EvaluationError(f"{len(unmatched)} prediction(s) without a benchmark record, e.g. "
                              f"{unmatched[:5]}", code="unmatched-scene")
    if dupes:
        raise EvaluationError(f"duplicate predictions for {dupes[:5]}", code="duplicate-scene")
    return [(p, refs[p.scene_id]) for p in predictions]


def evaluate_run(predictions: Sequence[Prediction], bench: Sequence[BenchRecord], gateway=None,
                 config: EvalConfig | None = None) -> EvalReport:
    """Judge scores, lexical metrics, word counts, latency and go/stop accuracy for one run.

    All scene ids are matched before the first judge call. Word counts average
    over every generated text of the five answer categories; inference time is
    the mean per-scene sum of call latencies.
    """
    config = config or EvalConfig()
    pairs = match_predictions(predictions, bench)
    if not config.metrics_only and gateway is None and pairs:
        raise EvaluationError("judging needs a judge gateway", code="no-judge")

    jobs = [(p.scene_id, cat, ref.texts()[cat], p.descriptions.get(cat)) for p, ref in pairs
            for cat in CATEGORIES]
    ratings: dict[tuple[str, str], int | None] = {}
    if not config.metrics_only and jobs:
        def judge(job):
            sid, cat, ref_text, cand = job
            if not cand.strip():
                return (sid, cat), None
            return (sid, cat), judge_description(ref_text, cand, gateway, config.judge_model_id).rating

        with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
            for key, rating in pool.map(judge, jobs):
                ratings[key] = rating

    category_means = {}
    scores: dict[str, dict[str, int | None]] = {}
    for cat in CATEGORIES:
        vals = [ratings.get((p.scene_id, cat)) for p, _ in pairs]
        category_means[cat] = None if config.metrics_only else _mean(vals)
    for (sid, cat), r in sorted(ratings.items()):
        scores.setdefault(sid, {})[cat] = r

    metric_means = {
        "rouge_l": _mean([rouge_l(cand, ref) for _, _, ref, cand in jobs]),
        "meteor_lite": _mean([meteor_lite(cand, ref) for _, _, ref, cand in jobs]),
    }
    if config.embed is not None:
        metric_means["embedding_f1"] = _mean([embedding_f1(c, r, config.embed) for _, _, r, c in jobs])

    latencies = [p.descriptions.total_latency_s for p, _ in pairs if p.descriptions.latencies_s]
    present = sum(r is not None for r in ratings.values())
    backend = config.label or next((p.backend_id for p, _ in pairs if p.backend_id), "") or "unknown"
    acc = go_stop_accuracy({p.scene_id: p.descriptions.t_reco for p, _ in pairs}, bench) if pairs else None
    return EvalReport(
        backend_id=backend,
        category_means=category_means,
        words_mean=_mean([word_count(cand) for _, _, _, cand in jobs]),
        inference_time_s=_mean(latencies),
        go_stop_accuracy=acc,
        metric_means=metric_means,
        n_scenes=len(pairs),
        judged=len(ratings),
        present=present,
        missing=len(ratings) - present,
        judge_model_id=None if config.metrics_only else config.judge_model_id,
        scores=scores,
    )
