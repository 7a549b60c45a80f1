"""Task accuracy (TA), azimuth accuracy (AA), caption BLEU (CB), caption similarity (CC)."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence, Union

from . import wire
from .answer import Answer, AnswerParseError, parse_answer
from .geometry import DEFAULT_TOLERANCE, azimuth_list_close, circular_distance, normalize_azimuth
from .tasks import TASK_ORDER, TaskKind
from .templates import InstructionRecord

BLEU_ORDER = 4

_BLEU_TOKEN = re.compile(r"\w+|[^\w\s]")
_WORD = re.compile(r"\w+")


def bleu_tokenize(text: str) -> list[str]:
    """Lowercase, then split into word runs and single punctuation marks."""
    return _BLEU_TOKEN.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def caption_bleu(pred_caption: str | None, ref_caption: str) -> float:
    """Sentence BLEU-4, uniform weights.

    Zero-count precisions of order >= 2 are add-one smoothed; a zero
    unigram precision gives 0. Empty or missing predictions score 0.
    """
    ref = bleu_tokenize(ref_caption)
    if not ref:
        raise ValueError("reference caption is empty")
    if not pred_caption:
        return 0.0
    hyp = bleu_tokenize(pred_caption)
    if not hyp:
        return 0.0
    log_precision = 0.0
    for n in range(1, BLEU_ORDER + 1):
        hyp_counts = _ngrams(hyp, n)
        ref_counts = _ngrams(ref, n)
        total = max(0, len(hyp) - n + 1)
        matched = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        if matched == 0:
            if n == 1:
                return 0.0
            p = 1.0 / (total + 1)
        else:
            p = matched / total
        log_precision += math.log(p) / BLEU_ORDER
    c, r = len(hyp), len(ref)
    log_bp = 0.0 if c > r else 1.0 - r / c
    return math.exp(log_bp + log_precision)


class ProviderError(Exception):
    pass


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> Sequence: ...


class LexicalProvider:
    """Bag-of-words term counts; cosine over these lies in [0, 1]."""

    def embed(self, texts: Sequence[str]) -> list[Counter]:
        return [Counter(_WORD.findall(t.lower())) for t in texts]


class RemoteEmbeddingProvider:
    """POSTs ``{texts: [...]}`` and expects ``{embeddings: [[...], ...]}``."""

    def __init__(self, endpoint: str, timeout: float = 120.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        try:
            body = wire.post_json(self.endpoint, {"texts": list(texts)}, self.timeout)
        except wire.WireError as exc:
            raise ProviderError(str(exc)) from None
        vectors = body.get("embeddings")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError("embedding service returned a malformed payload")
        return vectors


def cosine(u, v) -> float:
    if isinstance(u, Mapping):
        dot = sum(x * v.get(k, 0) for k, x in u.items())
        nu = sum(x * x for x in u.values())
        nv = sum(x * x for x in v.values())
    else:
        if len(u) != len(v):
            raise ProviderError("embedding dimensions differ")
        dot = sum(a * b for a, b in zip(u, v))
        nu = sum(a * a for a in u)
        nv = sum(b * b for b in v)
    if nu == 0 or nv == 0:
        return 0.0
    # a single sqrt of the product keeps identical integer vectors at exactly 1.0
    return max(-1.0, min(1.0, dot / math.sqrt(nu * nv)))


DEFAULT_PROVIDER = LexicalProvider()


def caption_similarity(
    pred_caption: str | None, ref_caption: str, provider: EmbeddingProvider | None = None
) -> float:
    """Cosine similarity of caption embeddings; raises :class:`ProviderError` on provider failure."""
    if not pred_caption:
        return 0.0
    provider = provider or DEFAULT_PROVIDER
    try:
        u, v = provider.embed([pred_caption, ref_caption])
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"{type(exc).__name__}: {exc}") from exc
    return cosine(u, v)


def task_accuracy(pred: Answer | AnswerParseError | None, truth: Answer) -> bool:
    return isinstance(pred, Answer) and pred.task is truth.task


def azimuth_accuracy(
    pred: Answer | AnswerParseError | None,
    truth: Answer,
    task: TaskKind | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> bool:
    """All-or-nothing azimuth check; I-degree compares only the rotation."""
    if not isinstance(pred, Answer):
        return False
    task = truth.task if task is None else TaskKind(task)
    if task is TaskKind.IMG_DEGREE:
        if len(pred.azimuths) != 2 or len(truth.azimuths) != 2:
            return False
        pred_delta = normalize_azimuth(pred.azimuths[1] - pred.azimuths[0])
        true_delta = normalize_azimuth(truth.azimuths[1] - truth.azimuths[0])
        return circular_distance(pred_delta, true_delta) <= tol
    return azimuth_list_close(pred.azimuths, truth.azimuths, tol)


@dataclass(frozen=True)
class SampleScore:
    id: str
    task: TaskKind
    task_correct: bool
    azimuth_correct: bool
    caption_bleu: float | None = None
    caption_sim: float | None = None
    parse_error: str | None = None
    cc_missing: bool = False


def score_sample(
    record: InstructionRecord,
    answer_text: str | None,
    tol: float = DEFAULT_TOLERANCE,
    provider: EmbeddingProvider | None = None,
) -> SampleScore:
    truth = record.ground_truth
    pred: Answer | None = None
    error = None
    if answer_text is None:
        error = "missing response"
    else:
        try:
            pred = parse_answer(answer_text)
        except AnswerParseError as exc:
            error = str(exc)

    bleu = sim = None
    cc_missing = False
    if truth.caption is not None:
        pred_caption = pred.caption if pred is not None else None
        bleu = caption_bleu(pred_caption, truth.caption)
        try:
            sim = caption_similarity(pred_caption, truth.caption, provider)
        except ProviderError:
            cc_missing = True
    return SampleScore(
        id=record.id,
        task=record.task,
        task_correct=task_accuracy(pred, truth),
        azimuth_correct=azimuth_accuracy(pred, truth, record.task, tol),
        caption_bleu=bleu,
        caption_sim=sim,
        parse_error=error,
        cc_missing=cc_missing,
    )


def _mean(values: Sequence[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class MetricRow:
    count: int
    TA: float | None
    AA: float | None
    CB: float | None = None
    CC: float | None = None
    cc_missing: int = 0
    parse_failures: int = 0

    @classmethod
    def from_scores(cls, scores: Sequence[SampleScore]) -> MetricRow:
        return cls(
            count=len(scores),
            TA=_mean([float(s.task_correct) for s in scores]),
            AA=_mean([float(s.azimuth_correct) for s in scores]),
            CB=_mean([s.caption_bleu for s in scores if s.caption_bleu is not None]),
            CC=_mean([s.caption_sim for s in scores if s.caption_sim is not None]),
            cc_missing=sum(s.cc_missing for s in scores),
            parse_failures=sum(s.parse_error is not None for s in scores),
        )

    def to_dict(self) -> dict:
        return {
            "TA": self.TA, "AA": self.AA, "CB": self.CB, "CC": self.CC,
            "count": self.count, "cc_missing": self.cc_missing,
            "parse_failures": self.parse_failures,
        }


@dataclass
class EvalReport:
    per_task: dict[TaskKind, MetricRow]
    aggregate: MetricRow
    tolerance: float = DEFAULT_TOLERANCE
    samples: list[SampleScore] = field(default_factory=list, repr=False)

    @property
    def average(self) -> float | None:
        """Mean of the four aggregate metrics that are defined."""
        a = self.aggregate
        return _mean([v for v in (a.TA, a.AA, a.CB, a.CC) if v is not None])

    def to_dict(self) -> dict:
        aggregate = self.aggregate.to_dict()
        aggregate["Avg"] = self.average
        return {
            "per_task": {k.short_name: row.to_dict() for k, row in self.per_task.items()},
            "aggregate": aggregate,
            "tolerance": self.tolerance,
        }

    def render_table(self, digits: int = 3) -> str:
        def cell(v):
            return "-" if v is None else f"{v:.{digits}f}"

        header = ("Tasks", "TA", "AA", "CB", "CC")
        rows = [
            (kind.short_name, cell(row.TA), cell(row.AA), cell(row.CB), cell(row.CC))
            for kind, row in self.per_task.items()
        ]
        a = self.aggregate
        footer = ("Avg.", cell(a.TA), cell(a.AA), cell(a.CB), cell(a.CC))
        widths = [max(len(r[i]) for r in [header, *rows, footer]) for i in range(5)]

        def line(r):
            return "  ".join(
                r[0].ljust(widths[0]) if i == 0 else r[i].rjust(widths[i])
                for i in range(5)
            ).rstrip()

        rule = "-" * len(line(header))
        return "\n".join([line(header), rule, *map(line, rows), rule, line(footer)]) + "\n"


ResponseInput = Union[Mapping[str, "str | None"], Iterable[tuple[str, "str | None"]]]


def _response_map(responses: ResponseInput) -> dict[str, str | None]:
    if isinstance(responses, Mapping):
        return dict(responses)
    out: dict[str, str | None] = {}
    for rid, text in responses:
        if rid in out:
            raise ValueError(f"duplicate response id {rid!r}")
        out[rid] = text
    return out


def evaluate(
    dataset: Sequence[InstructionRecord],
    responses: ResponseInput,
    tol: float = DEFAULT_TOLERANCE,
    provider: EmbeddingProvider | None = None,
) -> EvalReport:
    """Score every record; a missing or unparseable response counts as wrong everywhere."""
    if not dataset:
        raise ValueError("dataset is empty")
    answers = _response_map(responses)
    scores = [score_sample(r, answers.get(r.id), tol, provider) for r in dataset]
    by_task: dict[TaskKind, list[SampleScore]] = {k: [] for k in TASK_ORDER}
    for s in scores:
        by_task[s.task].append(s)
    per_task = {k: MetricRow.from_scores(v) for k, v in by_task.items() if v}
    return EvalReport(per_task, MetricRow.from_scores(scores), tol, scores)
