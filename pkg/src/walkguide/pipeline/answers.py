"""Numbered single-turn answers and tagged training answers."""

from __future__ import annotations

import logging
import re
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, unescape

from ..descriptions import ANSWER_SLOTS, SLOTS, DescriptionSet
from ..errors import IncompleteDescriptions, ParseFailure
from ..geometry import GoalPoint
from ..labels import parse_reco_label  # noqa: F401  re-exported for callers of this module
from ..prompts import format_point, render_sample_query, templates_digest
from ..scene import GeneratedSample

log = logging.getLogger(__name__)

_SECTION_RE = re.compile(r"^[ \t>*#]*(?:\*\*)?([1-6])\.(?!\d)[ \t]*(?:\*\*)?", re.M)
# "Left Side of the Path:" style header in front of the body
_HEADER_RE = re.compile(r"^\s*(?:\*\*)?([^.!?:\n]{1,60}):(?:\*\*)?[ \t]*\n?")

TAGS = {"dest": "dest_desc", "left": "left_desc", "right": "right_desc",
        "path": "path_desc", "reco": "reco_desc"}
PATH_TAG = "path_array"


def parse_numbered_answer(text: str) -> tuple[str, str, str, str, str, str]:
    """Bodies of sections 1..6 in slot order (dest, left, right, path, desc, reco).

    Sections are found by their line-initial number, so their order in the
    text does not matter. A repeated number keeps its first occurrence.
    """
    marks = list(_SECTION_RE.finditer(text))
    bodies: dict[int, str] = {}
    for i, m in enumerate(marks):
        n = int(m.group(1))
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        body = text[m.end():end]
        if n in bodies:
            log.warning("section %d appears more than once; keeping the first", n)
            continue
        body = _HEADER_RE.sub("", body, count=1).strip()
        bodies[n] = body
    missing = [n for n in range(1, 7) if not bodies.get(n)]
    if missing:
        raise ParseFailure(f"numbered answer lacks sections {missing}", raw=text, missing=missing)
    return tuple(bodies[n] for n in range(1, 7))


def descriptions_from_numbered(text: str) -> DescriptionSet:
    ds = DescriptionSet()
    for slot, body in zip(SLOTS, parse_numbered_answer(text)):
        ds.set(slot, body)
    return ds


def format_path_array(path_array: Sequence[Sequence[float]]) -> str:
    return "[" + ", ".join(format_point(p) for p in path_array) + "]"


def render_answer(descriptions: DescriptionSet | Mapping[str, str],
                  path_array: Sequence[Sequence[float]]) -> str:
    lines = []
    for slot in ANSWER_SLOTS:
        text = (descriptions.get(slot) or "").strip()
        if not text:
            raise IncompleteDescriptions(f"cannot emit a sample without the {slot} description")
        lines.append(f"<{TAGS[slot]}>{escape(text)}</{TAGS[slot]}>")
    lines.append(f"<{PATH_TAG}>{format_path_array(path_array)}</{PATH_TAG}>")
    return "\n".join(lines)


def emit_training_sample(scene_id: str, image: str, goal: GoalPoint,
                         descriptions: DescriptionSet, path_array: Sequence[Sequence[float]],
                         provenance: Mapping | None = None) -> GeneratedSample:
    answer = render_answer(descriptions, path_array)
    prov = {"templates": templates_digest()}
    prov.update(provenance or {})
    return GeneratedSample(
        scene_id=scene_id, image=image, goal=GoalPoint(goal.x_norm, goal.y_norm),
        query_text=render_sample_query((goal.x_norm, goal.y_norm)),
        answer_xml=answer,
        descriptions={s: descriptions.get(s).strip() for s in ANSWER_SLOTS},
        path_array=[tuple(p) for p in path_array],
        provenance=prov,
    )


_TAG_RE = re.compile(r"<(\w+)>(.*?)</\1>", re.S)
_NUM_PAIR_RE = re.compile(r"\[\s*([-0-9.eE]+)\s*,\s*([-0-9.eE]+)\s*\]")
_GOAL_RE = re.compile(r"point \[\s*([-0-9.eE]+)\s*,\s*([-0-9.eE]+)\s*\]")


def parse_answer(answer: str) -> tuple[dict[str, str], list[tuple[float, float]]]:
    """Inverse of :func:`render_answer`: the five texts and the path array."""
    found = {m.group(1): m.group(2) for m in _TAG_RE.finditer(answer)}
    missing = [t for t in (*TAGS.values(), PATH_TAG) if t not in found]
    if missing:
        raise ParseFailure(f"answer lacks tags {missing}", raw=answer)
    texts = {slot: unescape(found[tag]) for slot, tag in TAGS.items()}
    path = [(float(a), float(b)) for a, b in _NUM_PAIR_RE.findall(found[PATH_TAG])]
    return texts, path


def parse_sample(sample: GeneratedSample) -> tuple[tuple[float, float], dict[str, str], list]:
    """(goal, five texts, path array) recovered from the sample's conversation text."""
    m = _GOAL_RE.search(sample.query_text)
    if m is None:
        raise ParseFailure("query carries no goal point", raw=sample.query_text)
    texts, path = parse_answer(sample.answer_xml)
    return (float(m.group(1)), float(m.group(2))), texts, path
