"""View-instruction compiler, answer grammar, backend router and evaluation harness."""

from .answer import Answer, AnswerParseError, format_answer, parse_answer, validate_answer
from .geometry import Viewpoint, around_azimuths, normalize_azimuth, rotate_azimuth
from .tasks import TaskGroup, TaskKind
from .templates import DatasetSpec, InstructionRecord, TaskParams, generate_dataset

__all__ = [
    "Answer",
    "AnswerParseError",
    "DatasetSpec",
    "InstructionRecord",
    "TaskGroup",
    "TaskKind",
    "TaskParams",
    "Viewpoint",
    "around_azimuths",
    "format_answer",
    "generate_dataset",
    "normalize_azimuth",
    "parse_answer",
    "rotate_azimuth",
    "validate_answer",
]

__version__ = "0.1.0"
