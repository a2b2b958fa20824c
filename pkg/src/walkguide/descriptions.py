from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .labels import parse_reco_label

# Slot order of the multi-turn query; the recommendation consumes the first five.
SLOTS = ("dest", "left", "right", "path", "desc", "reco")
ANSWER_SLOTS = ("dest", "left", "right", "path", "reco")


@dataclass
class DescriptionSet:
    t_dest: str = ""
    t_left: str = ""
    t_right: str = ""
    t_path: str = ""
    t_desc: str = ""
    t_reco: str = ""
    latencies_s: dict[str, float] = field(default_factory=dict)

    def get(self, slot: str) -> str:
        return getattr(self, f"t_{slot}")

    def set(self, slot: str, text: str) -> None:
        if slot not in SLOTS:
            raise KeyError(slot)
        setattr(self, f"t_{slot}", text)

    def missing(self, slots=SLOTS) -> list[str]:
        return [s for s in slots if not self.get(s).strip()]

    def is_complete(self) -> bool:
        return not self.missing()

    @property
    def reco_label(self) -> str:
        return parse_reco_label(self.t_reco)

    @property
    def total_latency_s(self) -> float:
        return sum(self.latencies_s.values())

    def to_dict(self) -> dict:
        d = {s: self.get(s) for s in SLOTS}
        d["latencies_s"] = dict(self.latencies_s)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DescriptionSet":
        ds = cls(latencies_s={k: float(v) for k, v in (d.get("latencies_s") or {}).items()})
        for s in SLOTS:
            ds.set(s, d.get(s) or "")
        return ds


@dataclass
class Prediction:
    """One model's description set for one benchmark scene."""

    scene_id: str
    descriptions: DescriptionSet
    backend_id: str = ""
    mode: str = ""

    def to_dict(self) -> dict:
        d = {"scene_id": self.scene_id, "backend_id": self.backend_id, "mode": self.mode}
        d.update(self.descriptions.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Prediction":
        return cls(scene_id=str(d["scene_id"]), descriptions=DescriptionSet.from_dict(d),
                   backend_id=str(d.get("backend_id", "")), mode=str(d.get("mode", "")))
