"""Frozen prompt templates and their renderers.

Templates live as text assets next to this module and are rendered with
:class:`string.Template`. Coordinates are printed with at most four decimals,
trailing zeros trimmed but at least one digit kept (``0.5``, ``1.0``,
``0.502``).
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template
from typing import Iterable, Mapping, Sequence

from ..descriptions import DescriptionSet
from ..errors import IncompleteDescriptions, PromptError
from ..labels import display_label

TEMPLATE_VERSION = "1"
START_POINT = (0.5, 1.0)
# Joins the object clause onto a system prompt.
CLAUSE_SEPARATOR = "\n\n"
# Joins the five descriptions fed to the recommendation query.
DESCRIPTION_SEPARATOR = " "


class RegionKind(str, enum.Enum):
    DEST = "dest"
    LEFT = "left"
    RIGHT = "right"
    PATH = "path"
    DESC = "desc"
    RECO = "reco"


class RegionStyle(str, enum.Enum):
    MASKED_IMAGE = "masked-image"
    REGION_PROMPT = "region-prompt"


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    attach_full_image: bool = True
    attach_masked_region: RegionKind | None = None

    def __post_init__(self):
        if self.attach_full_image == (self.attach_masked_region is not None):
            raise PromptError("exactly one image attachment mode must be selected",
                              code="invalid-bundle")

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.system_text, self.user_text, str(self.attach_masked_region)):
            h.update(part.encode())
            h.update(b"\0")
        return h.hexdigest()


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text(encoding="utf-8")


def format_coord(v: float) -> str:
    s = f"{round(float(v), 4):.4f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def format_point(p: Sequence[float]) -> str:
    return "[" + ", ".join(format_coord(v) for v in p) + "]"


def _label_and_box(obj) -> tuple[str, Sequence[float]]:
    if isinstance(obj, Mapping):
        return obj["label"], obj["bbox"]
    if hasattr(obj, "label"):
        return obj.label, obj.bbox
    label, bbox = obj
    return label, bbox


def render_object_clause(objects: Iterable) -> str:
    parts = []
    for obj in objects:
        label, bbox = _label_and_box(obj)
        parts.append(f"{display_label(label)} {format_point(bbox)}")
    if not parts:
        raise PromptError("object clause needs at least one object; omit the clause instead",
                          code="empty-objects")
    return Template(load_template("object_clause")).substitute(objects=", ".join(parts))


def render_system_prompt(kind: str = "general", objects: Sequence | None = None) -> str:
    """System prompt for ``general``, ``recommendation`` or ``single-turn`` queries.

    A non-empty ``objects`` list appends the detection clause.
    """
    if kind == "general":
        text = load_template("system_preamble") + "\n\n" + load_template("rules_general")
    elif kind == "recommendation":
        text = (load_template("system_preamble") + "\n\n" + load_template("rules_general")
                + " " + load_template("rules_recommendation"))
    elif kind == "single-turn":
        text = load_template("single_turn_system")
    else:
        raise PromptError(f"unknown system prompt kind {kind!r}", code="wrong-renderer")
    if objects:
        text += CLAUSE_SEPARATOR + render_object_clause(objects)
    return text


def render_region_user_prompt(kind: RegionKind | str, mode: RegionStyle | str,
                              start: Sequence[float] = START_POINT,
                              goal: Sequence[float] | None = None,
                              force_masked_dest: bool = False) -> str:
    """User prompt for one of the four path-region queries.

    Destination queries use the coordinate wording in both styles, since the
    destination is a point the model can locate directly; ``force_masked_dest``
    selects the masked wording for ablations.
    """
    kind = RegionKind(kind)
    mode = RegionStyle(mode)
    if kind in (RegionKind.DESC, RegionKind.RECO):
        raise PromptError(f"{kind.value} queries have their own renderer", code="wrong-renderer")
    masked = mode is RegionStyle.MASKED_IMAGE
    if kind is RegionKind.DEST and not force_masked_dest:
        masked = False
    name = ("masked_" if masked else "region_") + kind.value
    if masked:
        return load_template(name)
    if goal is None:
        raise PromptError(f"{name} needs goal coordinates", code="missing-goal")
    return Template(load_template(name)).substitute(start=format_point(start), goal=format_point(goal))


def render_whole_image_prompt() -> str:
    return load_template("whole_image")


def concatenate_descriptions(descriptions: DescriptionSet | Mapping[str, str]) -> str:
    if isinstance(descriptions, Mapping):
        texts = [descriptions.get(k, "") for k in ("dest", "left", "right", "path", "desc")]
    else:
        texts = [descriptions.get(k) for k in ("dest", "left", "right", "path", "desc")]
    missing = [k for k, t in zip(("dest", "left", "right", "path", "desc"), texts) if not t.strip()]
    if missing:
        raise IncompleteDescriptions(f"missing descriptions: {', '.join(missing)}")
    return DESCRIPTION_SEPARATOR.join(t.strip() for t in texts)


def render_recommendation_prompt(descriptions: DescriptionSet | Mapping[str, str]) -> str:
    return Template(load_template("recommendation_user")).substitute(
        descriptions=concatenate_descriptions(descriptions))


def render_single_turn_prompt(start: Sequence[float] = START_POINT, goal: Sequence[float] = (0.5, 0.5),
                              objects: Sequence | None = None) -> tuple[str, str]:
    user = Template(load_template("single_turn_user")).substitute(
        start=format_point(start), goal=format_point(goal))
    return render_system_prompt("single-turn", objects), user


def render_judge_prompts(reference: str, assistant: str) -> tuple[str, str]:
    user = Template(load_template("judge_user")).substitute(reference=reference, assistant=assistant)
    return load_template("judge_system"), user


def render_sample_query(goal: Sequence[float]) -> str:
    return Template(load_template("sample_query")).substitute(goal=format_point(goal))


def build_region_bundle(kind: RegionKind | str, style: RegionStyle | str, goal: Sequence[float],
                        objects: Sequence | None = None, start: Sequence[float] = START_POINT,
                        descriptions: DescriptionSet | None = None) -> PromptBundle:
    """System/user text and attachment mode for one multi-turn slot."""
    kind = RegionKind(kind)
    style = RegionStyle(style)
    if kind is RegionKind.RECO:
        if descriptions is None:
            raise IncompleteDescriptions("recommendation needs the five prior descriptions")
        return PromptBundle(render_system_prompt("recommendation"),
                            render_recommendation_prompt(descriptions))
    system = render_system_prompt("general", objects)
    if kind is RegionKind.DESC:
        return PromptBundle(system, render_whole_image_prompt())
    user = render_region_user_prompt(kind, style, start=start, goal=goal)
    if kind is not RegionKind.DEST and style is RegionStyle.MASKED_IMAGE:
        return PromptBundle(system, user, attach_full_image=False, attach_masked_region=kind)
    return PromptBundle(system, user)


def templates_digest() -> str:
    """Stable hash over every template asset, recorded in sample provenance."""
    h = hashlib.sha256(TEMPLATE_VERSION.encode())
    for entry in sorted(resources.files(__package__).joinpath("templates").iterdir(), key=lambda p: p.name):
        h.update(entry.name.encode())
        h.update(entry.read_bytes())
    return h.hexdigest()[:16]
