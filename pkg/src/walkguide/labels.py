"""Go/stop decisions and the detector class vocabulary."""

from __future__ import annotations

import logging

log = logging.getLogger(__name__)

GO, STOP, UNKNOWN = "go", "stop", "unknown"
FOLLOW_PHRASE = "Follow the path"
STOP_PHRASE = "Stop and wait"

# Pedestrian-guidance landmarks.
LANDMARK_CLASSES = (
    "door", "elevator", "escalator", "stairs", "pedestrian traffic light",
    "entrance of subway station", "subway ticket gate",
)
# Moving and fixed sidewalk obstacles.
OBSTACLE_CLASSES = (
    "person", "stroller", "car", "wheelchair", "bus", "dog", "truck", "cat", "bicycle",
    "carrier", "motorcycle", "movable signage", "scooter",
    "tree trunk", "bus/taxi stop", "potted plant", "kiosk", "traffic light", "fire hydrant",
    "traffic sign", "parking meter", "pole", "bollard", "bench", "barricade", "chair",
    "power controller", "table", "traffic light controller",
)
VOCABULARY = frozenset(LANDMARK_CLASSES + OBSTACLE_CLASSES)
OTHER_PREFIX = "other:"


def parse_reco_label(text: str) -> str:
    """``go`` / ``stop`` from the leading option phrase of a recommendation, else ``unknown``."""
    head = text.strip().lower()
    if head.startswith(FOLLOW_PHRASE.lower()):
        return GO
    if head.startswith(STOP_PHRASE.lower()):
        return STOP
    return UNKNOWN


def normalize_label(raw: str) -> str:
    """Canonical vocabulary label; unknown classes map to ``other:<label>`` with a warning."""
    label = " ".join(raw.strip().lower().replace("_", " ").split())
    if label in VOCABULARY or label.startswith(OTHER_PREFIX):
        return label
    log.warning("label %r is outside the detector vocabulary; keeping it as other:%s", raw, label)
    return OTHER_PREFIX + label


def display_label(label: str) -> str:
    return label[len(OTHER_PREFIX):] if label.startswith(OTHER_PREFIX) else label
