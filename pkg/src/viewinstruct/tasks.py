from __future__ import annotations

from enum import Enum


class TaskGroup(str, Enum):
    IMAGE_BASED = "image-based"
    CAPTION_BASED = "caption-based"
    RELATED_VIEW = "related-view"


class TaskKind(str, Enum):
    """The five view-synthesis tasks; values are the answer-grammar short names."""

    IMG_AROUND = "I-around"
    IMG_SPECIFIC = "I-specific"
    TEXT_AROUND = "T-around"
    TEXT_SPECIFIC = "T-specific"
    IMG_DEGREE = "I-degree"

    @property
    def short_name(self) -> str:
        return self.value

    @property
    def group(self) -> TaskGroup:
        return _GROUPS[self]

    @property
    def is_around(self) -> bool:
        return self in (TaskKind.IMG_AROUND, TaskKind.TEXT_AROUND)

    @property
    def is_specific(self) -> bool:
        return self in (TaskKind.IMG_SPECIFIC, TaskKind.TEXT_SPECIFIC)

    @property
    def wants_caption(self) -> bool:
        """Whether the canonical answer carries a caption."""
        return self.group is not TaskGroup.CAPTION_BASED

    @property
    def needs_image(self) -> bool:
        return self.group is not TaskGroup.CAPTION_BASED

    @classmethod
    def from_name(cls, name: str) -> TaskKind:
        """Look up a task by short name (case-insensitive) or enum member name."""
        key = name.strip()
        for kind in cls:
            if key.lower() == kind.value.lower() or key.upper() == kind.name:
                return kind
        raise ValueError(f"unknown task {name!r}")


_GROUPS = {
    TaskKind.IMG_AROUND: TaskGroup.IMAGE_BASED,
    TaskKind.IMG_SPECIFIC: TaskGroup.IMAGE_BASED,
    TaskKind.TEXT_AROUND: TaskGroup.CAPTION_BASED,
    TaskKind.TEXT_SPECIFIC: TaskGroup.CAPTION_BASED,
    TaskKind.IMG_DEGREE: TaskGroup.RELATED_VIEW,
}

#: Row order used by reports.
TASK_ORDER = tuple(TaskKind)
