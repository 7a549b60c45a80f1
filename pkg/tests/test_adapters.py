import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from viewinstruct.adapters import (
    AdapterError,
    AdapterRequest,
    CorruptionAdapter,
    CorruptionPolicy,
    OracleAdapter,
    RemoteAdapter,
    UnrecognizedTemplate,
    corrupt_answer,
    oracle_answer,
    parse_instruction,
)
from viewinstruct.answer import format_answer, parse_answer
from viewinstruct.corpus import default_corpus
from viewinstruct.geometry import Viewpoint
from viewinstruct.tasks import TaskKind
from viewinstruct.templates import (
    VARIANTS,
    TaskParams,
    ground_truth_for,
    instantiate_instruction,
    sample_params,
    visible_params,
)

K = TaskKind


def test_parse_instruction_examples():
    text = instantiate_instruction(K.IMG_AROUND, TaskParams(n_views=8))
    assert parse_instruction(text) == (K.IMG_AROUND, TaskParams(n_views=8))
    assert parse_instruction(
        "Please provide the images from the left, rear based on the description a red wooden chair."
    ) == (K.TEXT_SPECIFIC, TaskParams(viewpoints=("left", "rear"), caption="a red wooden chair"))
    with pytest.raises(UnrecognizedTemplate):
        parse_instruction("How tall is this object?")


def test_parse_instruction_leniency():
    task, params = parse_instruction(
        "please analyze the object in the image and provide a descriptive caption.  "
        "provide the image from the BACK and Left."
    )
    assert task is K.IMG_SPECIFIC and params.viewpoints == (Viewpoint.REAR, Viewpoint.LEFT)


def test_parse_instruction_out_of_range():
    text = instantiate_instruction(K.IMG_AROUND, TaskParams(n_views=8)).replace("8", "9")
    with pytest.raises(UnrecognizedTemplate):
        parse_instruction(text)


@st.composite
def task_params_variant(draw):
    task = draw(st.sampled_from(list(K)))
    rng = random.Random(draw(st.integers(0, 2**32)))
    params = sample_params(task, rng, default_corpus())
    return task, params, draw(st.integers(0, len(VARIANTS[task]) - 1))


@given(task_params_variant())
def test_inverse_template(case):
    task, params, variant = case
    text = instantiate_instruction(task, params, variant)
    assert parse_instruction(text) == (task, visible_params(task, params))


def test_inverse_template_exhaustive_unique_match():
    from viewinstruct.templates import COMPILED_VARIANTS

    rng = random.Random(11)
    for task in K:
        for variant in range(3):
            for _ in range(40):
                params = sample_params(task, rng, default_corpus())
                text = " ".join(instantiate_instruction(task, params, variant).split())
                hits = [(t, i) for t, pats in COMPILED_VARIANTS.items()
                        for i, p in enumerate(pats) if p.fullmatch(text)]
                assert hits == [(task, variant)]


def test_oracle_examples(dataset, captioner):
    deg = next(r for r in dataset if r.task is K.IMG_DEGREE)
    text = oracle_answer(AdapterRequest.from_record(deg), captioner).answer_text
    # independent composition: rotate the front view by the degree, then format
    expected_rotated = (deg.params.degree % 360)
    assert parse_answer(text).azimuths == (0, expected_rotated)
    assert text == format_answer(deg.ground_truth)

    req = AdapterRequest(instantiate_instruction(K.TEXT_AROUND, TaskParams(n_views=2, caption="a mug")))
    assert oracle_answer(req).answer_text == "Task: T-around. Azimuth: [0, 180]."

    req = AdapterRequest(instantiate_instruction(K.IMG_DEGREE, TaskParams(degree=-45)), "img://1")
    assert oracle_answer(req, {"img://1": "a chair"}.get).answer_text == \
        "Task: I-degree. Azimuth: [0, 315]. Caption: a chair"

    with pytest.raises(UnrecognizedTemplate):
        oracle_answer(AdapterRequest("How tall is this object?"))


def test_oracle_needs_caption_for_image_tasks():
    req = AdapterRequest(instantiate_instruction(K.IMG_AROUND, TaskParams(n_views=2)), "img://nope")
    with pytest.raises(AdapterError):
        oracle_answer(req)


def test_oracle_exact_on_dataset(dataset, captioner):
    adapter = OracleAdapter(captioner)
    for r in dataset:
        assert adapter.answer(AdapterRequest.from_record(r)).answer_text == format_answer(r.ground_truth)


def test_request_requires_instruction():
    with pytest.raises(ValueError):
        AdapterRequest("  ")


def test_identity_policy_matches_oracle(dataset, captioner):
    adapter = CorruptionAdapter(CorruptionPolicy(), seed=3, captioner=captioner)
    for r in dataset:
        req = AdapterRequest.from_record(r)
        assert adapter.answer(req).answer_text == oracle_answer(req, captioner).answer_text


def test_forced_flip_never_keeps_task(dataset, captioner):
    policy = CorruptionPolicy(p_task_flip=1.0)
    for i, r in enumerate(dataset):
        text = corrupt_answer(AdapterRequest.from_record(r), policy, random.Random(i), captioner).answer_text
        assert parse_answer(text).task is not r.task


def test_corruption_deterministic(dataset, captioner):
    policy = CorruptionPolicy(0.3, 0.3, 7.0, 0.3)
    a = CorruptionAdapter(policy, seed=5, captioner=captioner)
    b = CorruptionAdapter(policy, seed=5, captioner=captioner)
    reqs = [AdapterRequest.from_record(r) for r in dataset]
    assert [a.answer(q).answer_text for q in reqs] == [b.answer(q).answer_text for q in reversed(reqs)][::-1]


@pytest.mark.parametrize("kwargs", [{"p_task_flip": 1.5}, {"p_azimuth_jitter": -0.1}, {"jitter_deg": -1}])
def test_policy_validation(kwargs):
    with pytest.raises(ValueError):
        CorruptionPolicy(**kwargs)


class _EchoModel(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.seen.append(body)
        req = AdapterRequest(body["instruction"], body.get("image_ref"), body["id"])
        text = oracle_answer(req, lambda ref: "a remote caption").answer_text
        data = json.dumps({"id": body["id"], "answer_text": text}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture
def echo_model():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EchoModel)
    server.seen = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def test_remote_adapter_wire_format(echo_model):
    url = f"http://127.0.0.1:{echo_model.server_address[1]}/answer"
    adapter = RemoteAdapter(url, timeout=5)
    instr = instantiate_instruction(K.IMG_DEGREE, TaskParams(degree=30))
    resp = adapter.answer(AdapterRequest(instr, "img://7", "rec-1"))
    assert resp.answer_text == "Task: I-degree. Azimuth: [0, 30]. Caption: a remote caption"
    assert echo_model.seen == [{"id": "rec-1", "instruction": instr, "image_ref": "img://7"}]
    adapter.answer(AdapterRequest("Generate 2 surrounding views of the object described as: a mug.", id="x"))
    assert "image_ref" not in echo_model.seen[-1]


def test_remote_adapter_down():
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(AdapterError):
        RemoteAdapter(f"http://127.0.0.1:{port}/", timeout=2).answer(AdapterRequest("x", id="1"))
