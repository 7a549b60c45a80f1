import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewinstruct.answer import (
    LINE_BREAKS,
    Answer,
    EmptyAzimuthList,
    MalformedAzimuthList,
    MissingField,
    TrailingGarbage,
    UnknownTask,
    format_answer,
    parse_answer,
    try_parse_answer,
    validate_answer,
)
from viewinstruct.tasks import TaskKind
from viewinstruct.templates import TaskParams

I_AROUND, T_AROUND, I_DEGREE = TaskKind.IMG_AROUND, TaskKind.TEXT_AROUND, TaskKind.IMG_DEGREE


@pytest.mark.parametrize("answer, text", [
    (Answer(I_AROUND, (0, 120, 240), "a blue ceramic mug"),
     "Task: I-around. Azimuth: [0, 120, 240]. Caption: a blue ceramic mug"),
    (Answer(TaskKind.TEXT_SPECIFIC, (270,)), "Task: T-specific. Azimuth: [270]."),
    (Answer(I_DEGREE, (0, 315), "a toy robot"), "Task: I-degree. Azimuth: [0, 315]. Caption: a toy robot"),
    (Answer(I_AROUND, (0, 51.428571), "x"), "Task: I-around. Azimuth: [0, 51.43]. Caption: x"),
])
def test_format(answer, text):
    assert format_answer(answer) == text
    assert parse_answer(text) == answer


def test_format_rejects_bad_degree_arity():
    with pytest.raises(ValueError):
        format_answer(Answer(I_DEGREE, (0, 1, 2), "c"))
    assert format_answer(Answer(I_DEGREE, (0, 1, 2), "c"), strict=False).startswith("Task: I-degree")


def test_answer_invariants():
    with pytest.raises(ValueError):
        Answer(I_AROUND, ())
    with pytest.raises(ValueError):
        Answer(I_AROUND, (0,), "two\nlines")
    with pytest.raises(ValueError):
        Answer(I_AROUND, (0,), " padded")
    assert Answer(I_DEGREE, (0, -45), "c").azimuths == (0, 315)


def test_parse_examples():
    assert parse_answer("Task: T-around. Azimuth: [0, 90, 180, 270].") == Answer(T_AROUND, (0, 90, 180, 270))
    assert parse_answer("task: i-degree. azimuth: [0, -45]. caption: a chair") == Answer(I_DEGREE, (0, 315), "a chair")


@pytest.mark.parametrize("text", [
    "  Task:I-around Azimuth:[0,90]  ",
    "TASK: I-AROUND. AZIMUTH: [ 0 , 90.00 ].",
    "Task: I-around. Azimuth: [360, 450]",
])
def test_parse_tolerated_noise(text):
    assert parse_answer(text) == Answer(I_AROUND, (0, 90))


def test_caption_keeps_inner_periods():
    a = parse_answer("Task: I-around. Azimuth: [0]. Caption: a mug. It is blue.")
    assert a.caption == "a mug. It is blue."


@pytest.mark.parametrize("text, error, attr", [
    ("Task: I-around. Caption: x", MissingField, ("field", "azimuth")),
    ("", MissingField, ("field", "task")),
    ("hello", MissingField, ("field", "task")),
    ("Task: I-sideways. Azimuth: [0].", UnknownTask, ("token", "I-sideways")),
    ("Task: T-around. Azimuth: [].", EmptyAzimuthList, None),
    ("Task: T-around. Azimuth: [0, x]", MalformedAzimuthList, ("position", 1)),
    ("Task: T-around. Azimuth: [0, 1.234]", MalformedAzimuthList, ("position", 1)),
    ("Task: T-around. Azimuth: [0, 90", MalformedAzimuthList, ("position", 1)),
    ("Task: T-around. Azimuth: 0, 90", MalformedAzimuthList, ("position", 0)),
    ("Task: T-around. Azimuth: [0]. extra", TrailingGarbage, None),
    ("Azimuth: [0]. Task: T-around.", TrailingGarbage, None),
    ("Task: I-around. Azimuth: [0]. Caption: a\nmore", TrailingGarbage, None),
])
def test_parse_errors(text, error, attr):
    with pytest.raises(error) as info:
        parse_answer(text)
    if attr:
        assert getattr(info.value, attr[0]) == attr[1]
    assert info.value.offset >= 0


def test_error_offsets_are_utf8_bytes():
    err = try_parse_answer("Task: é-around.")
    assert isinstance(err, UnknownTask)
    assert err.offset == len("Task: ".encode())
    err = try_parse_answer("Task: T-around. Azimuth: [0]. ünexpected")
    assert err.offset == len("Task: T-around. Azimuth: [0]. ".encode())


def test_parse_accepts_bytes():
    assert parse_answer(b"Task: T-around. Azimuth: [0].") == Answer(T_AROUND, (0,))
    assert isinstance(try_parse_answer(b"\xff\xfe\x00"), MissingField)


captions = st.text(
    st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40
).map(str.strip).filter(lambda s: s and not any(ch in s for ch in LINE_BREAKS))
azimuths = st.lists(st.integers(0, 35999).map(lambda k: k / 100), min_size=1, max_size=8)


@st.composite
def answers(draw):
    task = draw(st.sampled_from(list(TaskKind)))
    az = draw(azimuths)
    if task is I_DEGREE:
        az = (az * 2)[:2]
    caption = draw(st.none() | captions)
    return Answer(task, tuple(az), caption)


@given(answers())
def test_round_trip(a):
    assert parse_answer(format_answer(a)) == a


@given(st.binary(max_size=80) | st.text(max_size=80))
def test_parser_total(data):
    result = try_parse_answer(data)
    if isinstance(result, Answer):
        text = format_answer(result, strict=False)
        assert format_answer(parse_answer(text), strict=False) == text


def test_validate_examples():
    ok = validate_answer(Answer(I_DEGREE, (0, 90), "c"), I_DEGREE)
    assert ok.ok and not ok.warnings
    bad = validate_answer(Answer(I_DEGREE, (0, 90, 180), "c"), I_DEGREE)
    assert [v.code for v in bad.violations] == ["ArityViolation"]
    warn = validate_answer(Answer(T_AROUND, (0, 180), "extra"), T_AROUND)
    assert warn.violations == [] and len(warn.warnings) == 1


def test_validate_uses_params_and_caption():
    a = Answer(I_AROUND, (0, 180))
    codes = [v.code for v in validate_answer(a, I_AROUND, TaskParams(n_views=3)).violations]
    assert codes == ["ArityViolation", "MissingCaption"]
    codes = [v.code for v in validate_answer(a, TaskKind.IMG_SPECIFIC).violations]
    assert codes == ["TaskMismatch", "MissingCaption"]
    spec = validate_answer(Answer(TaskKind.TEXT_SPECIFIC, (270, 180)), TaskKind.TEXT_SPECIFIC,
                           TaskParams(viewpoints=("left", "rear"), caption="c"))
    assert spec.ok
