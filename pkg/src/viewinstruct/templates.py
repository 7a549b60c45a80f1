"""Instruction templates and seeded dataset generation for the five tasks.

Each task has a small bank of surface variants. Variant 0 reproduces the
reference wording; the others are fixed paraphrases. The same bank is
compiled into regular expressions so instructions can be inverted back
into ``(task, params)`` (see :func:`compile_variant`).
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .answer import Answer
from .corpus import default_corpus
from .geometry import (
    Viewpoint,
    around_azimuths,
    check_rotation,
    format_degrees,
    rotate_azimuth,
    viewpoint_to_azimuth,
)
from .tasks import TaskGroup, TaskKind

MAX_VIEWS = 8

VARIANTS: dict[TaskKind, tuple[str, ...]] = {
    TaskKind.IMG_AROUND: (
        "Analyze the object in the image and provide a descriptive caption. "
        "Generate {n} images from different perspectives around the object.",
        "Describe the object shown in the image with a caption, then produce "
        "{n} views evenly spaced around it.",
        "Caption the object in this picture and render it from {n} evenly "
        "distributed viewpoints around the object.",
    ),
    TaskKind.IMG_SPECIFIC: (
        "Please analyze the object in the image and provide a descriptive caption. "
        "Provide the image from the {v}.",
        "Write a descriptive caption for the object in the image and show it "
        "from the following viewpoints: {v}.",
        "Look at the object in the image, describe it in one caption, and "
        "generate views from the {v}.",
    ),
    TaskKind.TEXT_AROUND: (
        "Please generate images from {n} different perspectives around the "
        "object based on the description {c}.",
        "Based on the description {c}, create {n} views evenly spaced around the object.",
        "Generate {n} surrounding views of the object described as: {c}.",
    ),
    TaskKind.TEXT_SPECIFIC: (
        "Please provide the images from the {v} based on the description {c}.",
        "Using the description {c}, render the object from the {v}.",
        "Show the object described as {c} from the following viewpoints: {v}.",
    ),
    TaskKind.IMG_DEGREE: (
        "Please analyze the object in the image and provide a descriptive caption. "
        "Provide the image with the camera rotated by {d} degrees.",
        "Describe the object in the image with a caption, then rotate the camera "
        "by {d} degrees and provide the new view.",
        "Caption the object in this image and show how it looks after the camera "
        "turns {d} degrees.",
    ),
}


class ParamsError(ValueError):
    """Task parameters do not fit the task kind."""


@dataclass(frozen=True)
class TaskParams:
    n_views: int | None = None
    viewpoints: tuple[Viewpoint, ...] | None = None
    degree: float | None = None
    caption: str | None = None

    def __post_init__(self):
        if self.viewpoints is not None:
            object.__setattr__(
                self, "viewpoints", tuple(Viewpoint.parse(v) if isinstance(v, str) else v
                                          for v in self.viewpoints)
            )
        if self.degree is not None and float(self.degree).is_integer():
            object.__setattr__(self, "degree", int(self.degree))

    def to_dict(self) -> dict:
        out: dict = {}
        if self.n_views is not None:
            out["n_views"] = self.n_views
        if self.viewpoints is not None:
            out["viewpoints"] = [v.value for v in self.viewpoints]
        if self.degree is not None:
            out["degree"] = self.degree
        if self.caption is not None:
            out["caption"] = self.caption
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> TaskParams:
        return cls(
            n_views=data.get("n_views"),
            viewpoints=tuple(data["viewpoints"]) if data.get("viewpoints") is not None else None,
            degree=data.get("degree"),
            caption=data.get("caption"),
        )


def check_params(task: TaskKind, params: TaskParams) -> None:
    """Raise :class:`ParamsError` unless ``params`` has exactly the fields ``task`` needs.

    Caption is mandatory for caption-based tasks and optional for the rest,
    where it holds the hidden caption of the referenced image.
    """
    task = TaskKind(task)
    present = {
        "n_views": params.n_views is not None,
        "viewpoints": params.viewpoints is not None,
        "degree": params.degree is not None,
    }
    if task.is_around:
        required = "n_views"
    elif task.is_specific:
        required = "viewpoints"
    else:
        required = "degree"
    extra = [k for k, v in present.items() if v and k != required]
    if not present[required]:
        raise ParamsError(f"{task.short_name} requires {required}")
    if extra:
        raise ParamsError(f"{task.short_name} does not take {', '.join(extra)}")

    if task.is_around:
        n = params.n_views
        if isinstance(n, bool) or not isinstance(n, int) or not 1 <= n <= MAX_VIEWS:
            raise ParamsError(f"n_views must be an integer in [1, {MAX_VIEWS}], got {n!r}")
    elif task.is_specific:
        vps = params.viewpoints
        if not vps or len(vps) > 4 or len(set(vps)) != len(vps):
            raise ParamsError("viewpoints must be 1-4 distinct canonical viewpoints")
    else:
        try:
            check_rotation(params.degree)
        except (TypeError, ValueError) as exc:
            raise ParamsError(str(exc)) from None

    if task.group is TaskGroup.CAPTION_BASED and not params.caption:
        raise ParamsError(f"{task.short_name} requires a caption")


def instantiate_instruction(task: TaskKind, params: TaskParams, variant_id: int = 0) -> str:
    task = TaskKind(task)
    check_params(task, params)
    bank = VARIANTS[task]
    if not 0 <= variant_id < len(bank):
        raise ParamsError(f"unknown variant {variant_id} for {task.short_name}")
    values = {
        "n": str(params.n_views) if params.n_views is not None else "",
        "v": ", ".join(v.value for v in params.viewpoints) if params.viewpoints else "",
        "d": format_degrees(params.degree) if params.degree is not None else "",
        "c": params.caption or "",
    }
    return bank[variant_id].format(**values)


_VIEW_WORD = r"(?:front|left|right|rear|back)"
_VIEW_SEP = r"(?:\s*,\s*(?:and\s+)?|\s+and\s+)"
_SLOT_PATTERNS = {
    "n": r"(?P<n>\d+)",
    "v": rf"(?P<v>{_VIEW_WORD}(?:{_VIEW_SEP}{_VIEW_WORD})*)",
    "d": r"(?P<d>[+-]?\d+(?:\.\d+)?)",
    "c": r"(?P<c>.+)",
}


def compile_variant(template: str) -> re.Pattern:
    """Turn a template into an anchored, case-insensitive, whitespace-tolerant regex."""
    parts = re.split(r"\{([nvdc])\}", template)
    out = []
    for i, part in enumerate(parts):
        if i % 2:
            out.append(_SLOT_PATTERNS[part])
        else:
            out.append(r"\s+".join(re.escape(w) for w in part.split(" ")))
    return re.compile("".join(out), re.IGNORECASE | re.DOTALL)


COMPILED_VARIANTS: dict[TaskKind, tuple[re.Pattern, ...]] = {
    task: tuple(compile_variant(t) for t in bank) for task, bank in VARIANTS.items()
}


def split_viewpoints(text: str) -> tuple[Viewpoint, ...]:
    return tuple(Viewpoint.parse(w) for w in re.split(_VIEW_SEP, text.strip(), flags=re.IGNORECASE))


def sample_params(task: TaskKind, rng: random.Random, corpus: Sequence[str]) -> TaskParams:
    """Draw random parameters for ``task``; every task also gets a corpus caption."""
    if not corpus:
        raise ValueError("caption corpus is empty")
    task = TaskKind(task)
    caption = corpus[rng.randrange(len(corpus))]
    if task.is_around:
        return TaskParams(n_views=rng.randint(1, MAX_VIEWS), caption=caption)
    if task.is_specific:
        subset = list(rng.choice(_VIEWPOINT_SUBSETS))
        rng.shuffle(subset)
        return TaskParams(viewpoints=tuple(subset), caption=caption)
    return TaskParams(degree=rng.choice(_NONZERO_DEGREES), caption=caption)


_VIEWPOINT_SUBSETS = tuple(
    combo
    for k in range(1, 5)
    for combo in itertools.combinations(tuple(Viewpoint), k)
)
_NONZERO_DEGREES = tuple(d for d in range(-359, 360) if d != 0)


def ground_truth_for(task: TaskKind, params: TaskParams, reference_azimuth: float = 0.0) -> Answer:
    task = TaskKind(task)
    check_params(task, params)
    if task.is_around:
        azimuths = around_azimuths(params.n_views)
    elif task.is_specific:
        azimuths = [viewpoint_to_azimuth(v) for v in params.viewpoints]
    else:
        azimuths = [reference_azimuth, rotate_azimuth(reference_azimuth, params.degree)]
    caption = None
    if task.wants_caption:
        if not params.caption:
            raise ParamsError(f"{task.short_name} ground truth needs the image caption")
        caption = params.caption
    return Answer(task, tuple(azimuths), caption)


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    task: TaskKind
    instruction: str
    params: TaskParams
    ground_truth: Answer
    variant_id: int = 0
    image_ref: str | None = None

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "task": self.task.short_name, "instruction": self.instruction}
        if self.image_ref is not None:
            out["image_ref"] = self.image_ref
        out["params"] = self.params.to_dict()
        out["ground_truth"] = self.ground_truth.to_dict()
        out["variant_id"] = self.variant_id
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> InstructionRecord:
        return cls(
            id=str(data["id"]),
            task=TaskKind.from_name(data["task"]),
            instruction=data["instruction"],
            params=TaskParams.from_dict(data["params"]),
            ground_truth=Answer.from_dict(data["ground_truth"]),
            variant_id=int(data.get("variant_id", 0)),
            image_ref=data.get("image_ref"),
        )


@dataclass(frozen=True)
class DatasetSpec:
    count: int
    seed: int = 0
    weights: Mapping[TaskKind, float] | None = None
    corpus: Sequence[str] = field(default_factory=default_corpus)


def _resolve_weights(weights) -> list[float]:
    if weights is None:
        return [1.0] * len(TaskKind)
    if isinstance(weights, Mapping):
        table = {TaskKind.from_name(k) if isinstance(k, str) else TaskKind(k): float(v)
                 for k, v in weights.items()}
        out = [table.get(kind, 0.0) for kind in TaskKind]
    else:
        out = [float(w) for w in weights]
        if len(out) != len(TaskKind):
            raise ValueError(f"expected {len(TaskKind)} task weights, got {len(out)}")
    if any(w < 0 or w != w for w in out) or not any(out):
        raise ValueError("task weights must be non-negative and not all zero")
    return out


def generate_dataset(spec: DatasetSpec) -> list[InstructionRecord]:
    """Build ``spec.count`` records; output depends only on ``spec``."""
    if isinstance(spec.count, bool) or not isinstance(spec.count, int) or spec.count < 1:
        raise ValueError(f"count must be a positive integer, got {spec.count!r}")
    weights = _resolve_weights(spec.weights)
    corpus = list(spec.corpus)
    rng = random.Random(spec.seed)
    kinds = list(TaskKind)
    records = []
    for i in range(spec.count):
        task = rng.choices(kinds, weights=weights)[0]
        params = sample_params(task, rng, corpus)
        variant_id = rng.randrange(len(VARIANTS[task]))
        record_id = f"s{spec.seed}-{i:06d}"
        records.append(
            InstructionRecord(
                id=record_id,
                task=task,
                instruction=instantiate_instruction(task, params, variant_id),
                params=params,
                ground_truth=ground_truth_for(task, params, 0.0),
                variant_id=variant_id,
                image_ref=f"synth://images/{record_id}.png" if task.needs_image else None,
            )
        )
    return records


def visible_params(task: TaskKind, params: TaskParams) -> TaskParams:
    """Drop the fields an instruction does not reveal (the caption of an image task)."""
    if TaskKind(task).group is TaskGroup.CAPTION_BASED:
        return params
    return replace(params, caption=None)
