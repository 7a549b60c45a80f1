"""Instruction-understanding model adapters.

An adapter maps an instruction (plus an optional image reference) to an
answer string. Two adapters are built in: :class:`OracleAdapter` solves
instructions exactly by inverting the template bank, and
:class:`CorruptionAdapter` degrades oracle answers at controlled rates.
:class:`RemoteAdapter` forwards to an HTTP endpoint.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Protocol

from . import wire
from .answer import Answer, format_answer
from .tasks import TaskKind
from .templates import (
    COMPILED_VARIANTS,
    InstructionRecord,
    ParamsError,
    TaskParams,
    check_params,
    ground_truth_for,
    split_viewpoints,
)

DEFAULT_TIMEOUT = 120.0

Captioner = Callable[[str], "str | None"]


class AdapterError(Exception):
    pass


class UnrecognizedTemplate(AdapterError):
    pass


@dataclass(frozen=True)
class AdapterRequest:
    instruction: str
    image_ref: str | None = None
    id: str | None = None

    def __post_init__(self):
        if not self.instruction or not self.instruction.strip():
            raise ValueError("instruction must be non-empty")

    @classmethod
    def from_record(cls, record: InstructionRecord) -> AdapterRequest:
        return cls(record.instruction, record.image_ref, record.id)


@dataclass(frozen=True)
class AdapterResponse:
    answer_text: str
    latency: float = 0.0


class Adapter(Protocol):
    def answer(self, req: AdapterRequest) -> AdapterResponse: ...


def parse_instruction(text: str) -> tuple[TaskKind, TaskParams]:
    """Invert the template bank: recover the task and its visible parameters.

    Image-based instructions do not mention the caption, so the returned
    params carry ``caption=None`` for those tasks.
    """
    cleaned = " ".join(text.split())
    for task, patterns in COMPILED_VARIANTS.items():
        for pattern in patterns:
            m = pattern.fullmatch(cleaned)
            if m:
                return task, _params_from_match(task, m)
    raise UnrecognizedTemplate(f"instruction matches no known template: {text[:80]!r}")


def _params_from_match(task: TaskKind, m) -> TaskParams:
    groups = m.groupdict()
    params = TaskParams(
        n_views=int(groups["n"]) if groups.get("n") else None,
        viewpoints=split_viewpoints(groups["v"]) if groups.get("v") else None,
        degree=float(groups["d"]) if groups.get("d") else None,
        caption=groups["c"].strip() if groups.get("c") else None,
    )
    try:
        check_params(task, params)
    except ParamsError as exc:
        raise UnrecognizedTemplate(f"{task.short_name} instruction out of range: {exc}") from None
    return params


class LookupCaptioner:
    """Captions keyed by ``image_ref``; the default oracle captioner."""

    def __init__(self, table: Mapping[str, str] | None = None):
        self.table = dict(table or {})

    def __call__(self, image_ref: str) -> str | None:
        return self.table.get(image_ref)

    @classmethod
    def from_records(cls, records: Iterable[InstructionRecord]) -> LookupCaptioner:
        return cls({
            r.image_ref: r.ground_truth.caption
            for r in records
            if r.image_ref is not None and r.ground_truth.caption
        })


def solve(req: AdapterRequest, captioner: Captioner | None = None) -> Answer:
    task, params = parse_instruction(req.instruction)
    if task.wants_caption:
        caption = captioner(req.image_ref) if (captioner and req.image_ref) else None
        if not caption:
            raise AdapterError(f"no caption available for image {req.image_ref!r}")
        params = replace(params, caption=caption)
    return ground_truth_for(task, params, 0.0)


def oracle_answer(req: AdapterRequest, captioner: Captioner | None = None) -> AdapterResponse:
    t0 = time.perf_counter()
    text = format_answer(solve(req, captioner))
    return AdapterResponse(text, time.perf_counter() - t0)


@dataclass(frozen=True)
class CorruptionPolicy:
    p_task_flip: float = 0.0
    p_azimuth_jitter: float = 0.0
    jitter_deg: float = 0.0
    p_caption_shuffle: float = 0.0

    def __post_init__(self):
        for name in ("p_task_flip", "p_azimuth_jitter", "p_caption_shuffle"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p!r}")
        if not self.jitter_deg >= 0:
            raise ValueError(f"jitter_deg must be non-negative, got {self.jitter_deg!r}")


def corrupt_answer(
    req: AdapterRequest,
    policy: CorruptionPolicy,
    rng: random.Random,
    captioner: Captioner | None = None,
) -> AdapterResponse:
    """Oracle answer with independent task flip, azimuth jitter and caption shuffle.

    Jitter shifts azimuths by alternating ``+j, -j, ...`` (global sign
    random), so a jittered I-degree answer changes its rotation by ``2j``
    and every other answer moves each view by ``j``.
    """
    t0 = time.perf_counter()
    answer = solve(req, captioner)
    task, azimuths, caption = answer.task, list(answer.azimuths), answer.caption

    # draw all three events every time so one knob never shifts another's stream
    flip = rng.random() < policy.p_task_flip
    jitter = rng.random() < policy.p_azimuth_jitter
    shuffle = rng.random() < policy.p_caption_shuffle
    others = [k for k in TaskKind if k is not task]
    new_task = rng.choice(others)
    sign = rng.choice((1.0, -1.0))

    if flip:
        task = new_task
    if jitter and policy.jitter_deg:
        azimuths = [
            a + sign * policy.jitter_deg * (1 if k % 2 == 0 else -1)
            for k, a in enumerate(azimuths)
        ]
    if shuffle and caption:
        words = caption.split()
        rng.shuffle(words)
        caption = " ".join(words)

    text = format_answer(Answer(task, tuple(azimuths), caption), strict=False)
    return AdapterResponse(text, time.perf_counter() - t0)


class OracleAdapter:
    def __init__(self, captioner: Captioner | None = None):
        self.captioner = captioner

    def answer(self, req: AdapterRequest) -> AdapterResponse:
        return oracle_answer(req, self.captioner)


class CorruptionAdapter:
    """Seeded corruption; each request gets its own stream so call order is irrelevant."""

    def __init__(self, policy: CorruptionPolicy, seed: int = 0, captioner: Captioner | None = None):
        self.policy = policy
        self.seed = seed
        self.captioner = captioner

    def answer(self, req: AdapterRequest) -> AdapterResponse:
        rng = random.Random(f"{self.seed}|{req.id}|{req.instruction}")
        return corrupt_answer(req, self.policy, rng, self.captioner)


class RemoteAdapter:
    """POSTs ``{id, instruction, image_ref?}`` and expects ``{id, answer_text}`` back.

    No retries: a retried request could be scored twice.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.endpoint = endpoint
        self.timeout = timeout

    def answer(self, req: AdapterRequest) -> AdapterResponse:
        payload: dict = {"id": req.id, "instruction": req.instruction}
        if req.image_ref is not None:
            payload["image_ref"] = req.image_ref
        t0 = time.perf_counter()
        try:
            body = wire.post_json(self.endpoint, payload, self.timeout)
        except wire.WireError as exc:
            raise AdapterError(f"remote adapter failed: {exc}") from None
        if body.get("id") != req.id:
            raise AdapterError(f"response id {body.get('id')!r} does not match request {req.id!r}")
        text = body.get("answer_text")
        if not isinstance(text, str) or not text:
            raise AdapterError("remote adapter returned no answer_text")
        return AdapterResponse(text, time.perf_counter() - t0)
