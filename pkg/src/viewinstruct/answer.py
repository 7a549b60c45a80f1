"""Structured answer format: ``Task: <name>. Azimuth: [d1, ...]. Caption: <text>``.

:func:`format_answer` is strict and produces exactly one canonical string
per :class:`Answer`. :func:`parse_answer` is tolerant of surface noise
(case, whitespace, optional periods, unnormalized degrees) but keeps the
field order fixed. Every parse failure is an :class:`AnswerParseError`
carrying the UTF-8 byte offset where scanning stopped.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, Union

from .geometry import degrees_to_json, format_degrees, quantize_azimuth
from .tasks import TaskKind

if TYPE_CHECKING:
    from .templates import TaskParams

LINE_BREAKS = "\n\r\x0b\x0c\x1c\x1d\x1e\x85\u2028\u2029"


def _check_caption(caption: str | None) -> str | None:
    if caption is None:
        return None
    if not isinstance(caption, str):
        raise TypeError(f"caption must be text, got {type(caption).__name__}")
    if not caption or caption != caption.strip():
        raise ValueError("caption must be non-empty with no surrounding whitespace")
    if any(ch in LINE_BREAKS for ch in caption):
        raise ValueError("caption must be a single line")
    return caption


@dataclass(frozen=True)
class Answer:
    """Parsed model output. Azimuths are quantized to two decimals in ``[0, 360)``."""

    task: TaskKind
    azimuths: tuple[float, ...]
    caption: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind(self.task))
        azimuths = tuple(quantize_azimuth(a) for a in self.azimuths)
        if not azimuths:
            raise ValueError("an answer needs at least one azimuth")
        object.__setattr__(self, "azimuths", azimuths)
        object.__setattr__(self, "caption", _check_caption(self.caption))

    def to_dict(self) -> dict:
        out: dict = {
            "task": self.task.short_name,
            "azimuths": [degrees_to_json(a) for a in self.azimuths],
        }
        if self.caption is not None:
            out["caption"] = self.caption
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Answer:
        return cls(
            TaskKind.from_name(data["task"]),
            tuple(data["azimuths"]),
            data.get("caption"),
        )


def format_answer(a: Answer, strict: bool = True) -> str:
    """Render the canonical answer string.

    With ``strict`` (the default) an I-degree answer must hold exactly two
    azimuths. ``strict=False`` is for fixtures that deliberately emit
    malformed-but-parseable answers.
    """
    if strict and a.task is TaskKind.IMG_DEGREE and len(a.azimuths) != 2:
        raise ValueError(f"I-degree answers carry exactly 2 azimuths, got {len(a.azimuths)}")
    text = f"Task: {a.task.short_name}. Azimuth: {format_azimuth_list(a.azimuths)}."
    if a.caption is not None:
        text += f" Caption: {a.caption}"
    return text


class AnswerParseError(ValueError):
    kind = "ParseError"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{self.kind} at byte {offset}: {message}")
        self.offset = offset


class MissingField(AnswerParseError):
    kind = "MissingField"

    def __init__(self, field_name: str, offset: int):
        super().__init__(f"expected {field_name!r} field", offset)
        self.field = field_name


class UnknownTask(AnswerParseError):
    kind = "UnknownTask"

    def __init__(self, token: str, offset: int):
        super().__init__(f"unknown task {token!r}", offset)
        self.token = token


class MalformedAzimuthList(AnswerParseError):
    kind = "MalformedAzimuthList"

    def __init__(self, position: int, offset: int, reason: str = "malformed entry"):
        super().__init__(f"{reason} at list position {position}", offset)
        self.position = position


class EmptyAzimuthList(AnswerParseError):
    kind = "EmptyAzimuthList"

    def __init__(self, offset: int):
        super().__init__("azimuth list is empty", offset)


class TrailingGarbage(AnswerParseError):
    kind = "TrailingGarbage"

    def __init__(self, offset: int):
        super().__init__("unexpected text", offset)


_WS = re.compile(r"\s*")
_LABEL = re.compile(r"(task|azimuth|caption)\s*:", re.IGNORECASE)
_TASK_TOKEN = re.compile(r"[^\s.]+")
_NUMBER = re.compile(r"[+-]?(\d+)(?:\.(\d+))?")
_TASKS_BY_NAME = {kind.short_name.lower(): kind for kind in TaskKind}


class _Scanner:
    def __init__(self, source: str | bytes):
        if isinstance(source, (bytes, bytearray)):
            self.text = bytes(source).decode("utf-8", "surrogateescape")
            self._errors = "surrogateescape"
        else:
            self.text = source
            self._errors = "surrogatepass"
        self.pos = 0

    def offset(self, pos: int | None = None) -> int:
        pos = self.pos if pos is None else pos
        return len(self.text[:pos].encode("utf-8", self._errors))

    def skip_ws(self) -> None:
        self.pos = _WS.match(self.text, self.pos).end()

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def accept(self, ch: str) -> bool:
        if self.text.startswith(ch, self.pos):
            self.pos += len(ch)
            return True
        return False

    def label(self) -> str | None:
        m = _LABEL.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        return m.group(1).lower()


def parse_answer(source: str | bytes) -> Answer:
    """Parse model output into an :class:`Answer`; raises :class:`AnswerParseError`."""
    s = _Scanner(source)
    text = s.text

    s.skip_ws()
    start = s.pos
    if s.label() != "task":
        s.pos = start
        if re.search(r"task\s*:", text[start:], re.IGNORECASE) and _LABEL.match(text, start):
            # fields present but out of order
            raise TrailingGarbage(s.offset())
        raise MissingField("task", s.offset())

    s.skip_ws()
    m = _TASK_TOKEN.match(text, s.pos)
    token = m.group(0) if m else ""
    kind = _TASKS_BY_NAME.get(token.lower())
    if kind is None:
        raise UnknownTask(token, s.offset())
    s.pos = m.end()
    s.skip_ws()
    s.accept(".")
    s.skip_ws()

    if s.label() != "azimuth":
        raise MissingField("azimuth", s.offset())
    azimuths = _parse_azimuth_list(s)

    s.skip_ws()
    s.accept(".")
    s.skip_ws()
    caption = None
    if not s.at_end():
        start = s.pos
        if s.label() != "caption":
            raise TrailingGarbage(s.offset(start))
        end = s.pos
        while end < len(text) and text[end] not in LINE_BREAKS:
            end += 1
        caption = text[s.pos:end].strip() or None
        s.pos = end
        s.skip_ws()
        if not s.at_end():
            raise TrailingGarbage(s.offset())

    return Answer(kind, tuple(azimuths), caption)


def _parse_azimuth_list(s: _Scanner) -> list[float]:
    text = s.text
    s.skip_ws()
    if not s.accept("["):
        raise MalformedAzimuthList(0, s.offset(), "expected '['")
    s.skip_ws()
    if s.accept("]"):
        raise EmptyAzimuthList(s.offset())
    values: list[float] = []
    while True:
        position = len(values)
        s.skip_ws()
        m = _NUMBER.match(text, s.pos)
        if not m:
            raise MalformedAzimuthList(position, s.offset(), "expected a number")
        if m.group(2) is not None and len(m.group(2)) > 2:
            raise MalformedAzimuthList(position, s.offset(), "more than 2 decimals")
        # isascii guards against non-ASCII digits that \d admits
        if not m.group(0).isascii():
            raise MalformedAzimuthList(position, s.offset(), "non-ASCII digits")
        value = float(m.group(0))
        if not math.isfinite(value):
            raise MalformedAzimuthList(position, s.offset(), "value out of range")
        values.append(value)
        s.pos = m.end()
        s.skip_ws()
        if s.accept(","):
            continue
        if s.accept("]"):
            return values
        raise MalformedAzimuthList(position, s.offset(), "expected ',' or ']'")


def try_parse_answer(source: str | bytes) -> Union[Answer, AnswerParseError]:
    """Like :func:`parse_answer` but returns the error instead of raising."""
    try:
        return parse_answer(source)
    except AnswerParseError as exc:
        return exc


@dataclass(frozen=True)
class Issue:
    code: str
    message: str


@dataclass
class Validation:
    violations: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_answer(
    a: Answer, expected: TaskKind, params: TaskParams | None = None
) -> Validation:
    """Check an answer against the task it should solve.

    Arity is checked against ``params`` when given (views for around tasks,
    viewpoint count for specific tasks) and always for I-degree. A caption on
    a caption-based task is a warning only.
    """
    result = Validation()
    if a.task is not expected:
        result.violations.append(
            Issue("TaskMismatch", f"expected {expected.short_name}, got {a.task.short_name}")
        )
    want = None
    if expected is TaskKind.IMG_DEGREE:
        want = 2
    elif params is not None and expected.is_around and params.n_views is not None:
        want = params.n_views
    elif params is not None and expected.is_specific and params.viewpoints:
        want = len(params.viewpoints)
    if want is not None and len(a.azimuths) != want:
        result.violations.append(
            Issue("ArityViolation", f"expected {want} azimuths, got {len(a.azimuths)}")
        )
    if expected.wants_caption and a.caption is None:
        result.violations.append(Issue("MissingCaption", "caption required for this task"))
    elif not expected.wants_caption and a.caption is not None:
        result.warnings.append(Issue("UnexpectedCaption", "caption ignored for caption-based task"))
    return result


def format_azimuth_list(values: Sequence[float]) -> str:
    return "[" + ", ".join(format_degrees(v) for v in values) + "]"
