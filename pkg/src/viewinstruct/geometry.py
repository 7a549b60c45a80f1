"""Azimuth arithmetic shared by every stage of the pipeline.

Azimuths are plain floats in degrees, normalized to ``[0, 360)``. The
orientation convention is clockwise from the front when the object is
viewed from above, so ``right`` is 90 and ``left`` is 270.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Sequence

#: Default tolerance (degrees) for circular azimuth comparison.
DEFAULT_TOLERANCE = 0.5

#: Number of decimals kept whenever an azimuth is serialized.
PRECISION = 2


class Viewpoint(str, Enum):
    FRONT = "front"
    RIGHT = "right"
    REAR = "rear"
    LEFT = "left"

    @classmethod
    def parse(cls, token: str) -> Viewpoint:
        name = token.strip().lower()
        if name == "back":
            return cls.REAR
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown viewpoint {token!r}") from None


_VIEWPOINT_AZIMUTH = {
    Viewpoint.FRONT: 0.0,
    Viewpoint.RIGHT: 90.0,
    Viewpoint.REAR: 180.0,
    Viewpoint.LEFT: 270.0,
}


def normalize_azimuth(raw: float) -> float:
    """Map any finite angle onto ``[0, 360)``."""
    raw = float(raw)
    if not math.isfinite(raw):
        raise ValueError(f"azimuth must be finite, got {raw!r}")
    value = raw % 360.0
    # tiny negative inputs land on 360.0 after the modulo
    if value >= 360.0:
        value -= 360.0
    return value + 0.0  # drops -0.0


def quantize_azimuth(raw: float) -> float:
    """Normalize and round to serialization precision, staying in ``[0, 360)``."""
    value = round(normalize_azimuth(raw), PRECISION)
    if value >= 360.0:
        value = 0.0
    return value + 0.0


def format_degrees(value: float) -> str:
    """Render degrees with at most two decimals and no trailing zeros.

    >>> format_degrees(90.0), format_degrees(51.428571), format_degrees(-45)
    ('90', '51.43', '-45')
    """
    text = f"{float(value):.{PRECISION}f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


def degrees_to_json(value: float) -> int | float:
    """Numeric form of :func:`format_degrees` for structured output."""
    text = format_degrees(value)
    return float(text) if "." in text else int(text)


def check_rotation(delta: float) -> float:
    delta = float(delta)
    if not (math.isfinite(delta) and -360.0 < delta < 360.0):
        raise ValueError(f"rotation must lie strictly inside (-360, 360), got {delta!r}")
    return delta


def viewpoint_to_azimuth(v: Viewpoint | str) -> float:
    if not isinstance(v, Viewpoint):
        v = Viewpoint.parse(v)
    return _VIEWPOINT_AZIMUTH[v]


def around_azimuths(n: int) -> list[float]:
    """Evenly spaced azimuths starting at the front view.

    >>> around_azimuths(4)
    [0.0, 90.0, 180.0, 270.0]
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"number of views must be a positive integer, got {n!r}")
    n = int(n)
    return [quantize_azimuth(k * 360.0 / n) for k in range(n)]


def rotate_azimuth(origin: float, delta: float) -> float:
    return normalize_azimuth(normalize_azimuth(origin) + check_rotation(delta))


def circular_distance(a: float, b: float) -> float:
    d = abs(normalize_azimuth(a) - normalize_azimuth(b))
    return min(d, 360.0 - d)


def azimuth_list_close(
    a: Sequence[float], b: Sequence[float], tol: float = DEFAULT_TOLERANCE
) -> bool:
    """Position-wise circular comparison; order matters."""
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    if len(a) != len(b):
        return False
    return all(circular_distance(x, y) <= tol for x, y in zip(a, b))
