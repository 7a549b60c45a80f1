"""Synthetic combinatorial caption corpus (stand-in for per-object captions)."""

from __future__ import annotations

import itertools
from functools import lru_cache

COLORS = (
    "red", "blue", "green", "yellow", "black", "white",
    "orange", "purple", "brown", "gray", "pink", "silver",
)
MATERIALS = (
    "wooden", "metal", "plastic", "ceramic", "glass",
    "leather", "stone", "fabric", "rubber", "paper",
)
OBJECTS = (
    "chair", "mug", "lamp", "table", "vase", "toy robot", "teapot", "bench",
    "clock", "helmet", "backpack", "bottle", "bowl", "shoe", "guitar",
    "sofa", "bicycle", "kettle", "drone", "statue", "truck", "sailboat",
    "camera", "stool", "bucket", "trophy", "cabinet", "toy car", "basket",
    "dragon figurine",
)
DETAILS = (
    "",
    "with a glossy finish",
    "on a round base",
    "with worn edges",
)


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


@lru_cache(maxsize=None)
def default_corpus() -> tuple[str, ...]:
    """All 14,400 captions, in a fixed order."""
    out = []
    for color, material, obj, detail in itertools.product(COLORS, MATERIALS, OBJECTS, DETAILS):
        caption = f"{_article(color)} {color} {material} {obj}"
        if detail:
            caption += " " + detail
        out.append(caption)
    return tuple(out)
