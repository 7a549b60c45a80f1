"""``viewinstruct`` command line: gen -> answer -> eval, plus plan and mock-backend.

Every stage reads and writes JSON-lines files so any of them can be swapped
for an external tool. Exit codes: 0 success, 1 partial failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import jsonl
from .adapters import (
    AdapterError,
    AdapterRequest,
    CorruptionAdapter,
    CorruptionPolicy,
    LookupCaptioner,
    OracleAdapter,
    RemoteAdapter,
)
from .answer import AnswerParseError, parse_answer
from .dispatch import (
    FAIL_MODES,
    BackendClient,
    BackendId,
    BackendRejected,
    BackendUnavailable,
    CameraConfig,
    ContextMismatch,
    DispatchError,
    MockBackend,
    PlanContext,
    PlanError,
    Timeout,
    ValidationFailed,
    build_plan,
    dispatch_plan,
)
from .geometry import DEFAULT_TOLERANCE
from .metrics import RemoteEmbeddingProvider, evaluate
from .tasks import TaskKind
from .templates import DatasetSpec, InstructionRecord, generate_dataset

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2

ENV_PREFIX = "VIEWINSTRUCT_"


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return config


def _pick(flag, config: dict, key: str, default):
    return flag if flag is not None else config.get(key, default)


def parse_mix(text: str | None) -> dict[TaskKind, float] | None:
    """``I-around=2,T-around=1`` -> weights; unnamed tasks get weight 0."""
    if not text:
        return None
    weights = {}
    for item in text.split(","):
        name, _, value = item.partition("=")
        try:
            weights[TaskKind.from_name(name)] = float(value)
        except ValueError:
            raise UsageError(f"bad --mix entry {item!r}; expected TASK=WEIGHT") from None
    return weights


def read_dataset(path) -> list[InstructionRecord]:
    try:
        return [InstructionRecord.from_dict(row) for row in jsonl.iter_jsonl(path)]
    except FileNotFoundError:
        raise UsageError(f"dataset not found: {path}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"{path}: bad dataset record ({exc})") from None


def read_responses(path) -> dict[str, str | None]:
    """Map id -> answer text; error entries map to ``None``."""
    out: dict[str, str | None] = {}
    try:
        rows = jsonl.read_jsonl(path)
    except FileNotFoundError:
        raise UsageError(f"responses not found: {path}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for row in rows:
        rid = str(row.get("id"))
        if rid in out:
            raise UsageError(f"{path}: duplicate response id {rid!r}")
        text = row.get("answer_text")
        out[rid] = text if isinstance(text, str) else None
    return out


# --- gen ---------------------------------------------------------------------

def cmd_gen(args, config) -> int:
    count = _pick(args.count, config, "count", None)
    if count is None or count < 1:
        raise UsageError("--count must be a positive integer")
    seed = _pick(args.seed, config, "seed", 0)
    weights = parse_mix(args.mix) or config.get("task_mix")
    try:
        records = generate_dataset(DatasetSpec(count=count, seed=seed, weights=weights))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    n = jsonl.write_jsonl(args.out, (r.to_dict() for r in records))
    print(f"wrote {n} records to {args.out}", file=sys.stderr)
    return EXIT_OK


# --- answer ------------------------------------------------------------------

def make_adapter(args, config: dict, records):
    adapter_cfg = config.get("adapter", {})
    kind = args.adapter or adapter_cfg.get("kind", "oracle")
    captioner = LookupCaptioner.from_records(records)
    if kind == "oracle":
        return OracleAdapter(captioner)
    if kind == "corrupt":
        policy_cfg = adapter_cfg.get("policy", {})
        try:
            policy = CorruptionPolicy(
                p_task_flip=_pick(args.p_task_flip, policy_cfg, "p_task_flip", 0.0),
                p_azimuth_jitter=_pick(args.p_azimuth_jitter, policy_cfg, "p_azimuth_jitter", 0.0),
                jitter_deg=_pick(args.jitter_deg, policy_cfg, "jitter_deg", 0.0),
                p_caption_shuffle=_pick(args.p_caption_shuffle, policy_cfg, "p_caption_shuffle", 0.0),
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return CorruptionAdapter(policy, _pick(args.seed, config, "seed", 0), captioner)
    if kind == "remote":
        endpoint = (args.endpoint or os.environ.get(ENV_PREFIX + "ADAPTER_URL")
                    or adapter_cfg.get("endpoint"))
        if not endpoint:
            raise UsageError("remote adapter needs --endpoint")
        return RemoteAdapter(endpoint, _pick(args.timeout, config, "timeout", 120.0))
    raise UsageError(f"unknown adapter {kind!r}")


def _answer_one(adapter, record: InstructionRecord) -> dict:
    try:
        resp = adapter.answer(AdapterRequest.from_record(record))
    except (AdapterError, ValueError) as exc:
        return {"id": record.id, "error": str(exc)}
    return {"id": record.id, "answer_text": resp.answer_text}


def cmd_answer(args, config) -> int:
    records = read_dataset(args.dataset)
    adapter = make_adapter(args, config, records)
    jobs = max(1, args.jobs)
    if jobs == 1:
        rows = [_answer_one(adapter, r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda r: _answer_one(adapter, r), records))
    jsonl.write_jsonl(args.out, rows)
    failed = sum("error" in row for row in rows)
    print(f"wrote {len(rows)} responses to {args.out} ({failed} errors)", file=sys.stderr)
    if records and failed == len(rows):
        return EXIT_PARTIAL
    return EXIT_OK


# --- eval --------------------------------------------------------------------

def cmd_eval(args, config) -> int:
    records = read_dataset(args.dataset)
    responses = read_responses(args.responses)
    tol = _pick(args.tol, config, "tolerance", DEFAULT_TOLERANCE)
    endpoint = args.embedding_endpoint or os.environ.get(ENV_PREFIX + "EMBEDDING_URL")
    provider = RemoteEmbeddingProvider(endpoint) if endpoint else None
    if not records:
        raise UsageError("dataset is empty")
    report = evaluate(records, responses, tol=tol, provider=provider)
    with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    table = report.render_table()
    if args.table:
        Path(args.table).write_text(table, encoding="utf-8")
    print(table, end="")
    if args.figure:
        from .plotting import plot_report

        plot_report(report, args.figure)
    missing = report.aggregate.cc_missing
    if missing:
        print(f"caption similarity unavailable for {missing} samples", file=sys.stderr)
    return EXIT_OK


# --- plan --------------------------------------------------------------------

def backend_endpoints(args, config) -> dict[BackendId, str]:
    endpoints = {BackendId(k): v for k, v in config.get("backends", {}).items()}
    for backend in BackendId:
        env = os.environ.get(f"{ENV_PREFIX}{backend.name}_URL")
        if env:
            endpoints[backend] = env
    for item in args.backend or []:
        name, _, url = item.partition("=")
        try:
            endpoints[BackendId(name.strip().lower())] = url
        except ValueError:
            raise UsageError(f"bad --backend {item!r}; expected NAME=URL") from None
    return endpoints


def _error_code(exc: Exception) -> str:
    for cls, code in (
        (AnswerParseError, "parse_error"), (ValidationFailed, "validation_failed"),
        (ContextMismatch, "context_mismatch"), (BackendUnavailable, "backend_unavailable"),
        (BackendRejected, "backend_rejected"), (Timeout, "timeout"),
    ):
        if isinstance(exc, cls):
            return code
    return "error"


def cmd_plan(args, config) -> int:
    records = read_dataset(args.dataset)
    responses = read_responses(args.responses)
    cam_cfg = config.get("camera", {})
    try:
        camera = CameraConfig(
            elevation=float(_pick(args.elevation, cam_cfg, "elevation", 0.0)),
            radius=float(_pick(args.radius, cam_cfg, "radius", 1.5)),
            resolution=int(_pick(args.resolution, cam_cfg, "resolution", 256)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    plans, errors = [], []
    for record in records:
        text = responses.get(record.id)
        try:
            if text is None:
                raise PlanError("no answer for this record")
            answer = parse_answer(text)
            context = PlanContext(record.image_ref, record.task, record.params, record.params.caption)
            plans.append(build_plan(answer, context, camera, plan_id=record.id))
        except (AnswerParseError, PlanError) as exc:
            errors.append({"id": record.id, "error": {"code": _error_code(exc), "message": str(exc)}})

    jsonl.write_jsonl(args.plans, (p.to_wire() for p in plans))
    errors_path = args.errors or str(Path(args.plans).with_suffix("")) + ".errors.jsonl"
    jsonl.write_jsonl(errors_path, errors)
    print(f"wrote {len(plans)} plans to {args.plans}; {len(errors)} skipped ({errors_path})",
          file=sys.stderr)
    failed = len(errors)

    if not args.dry_run:
        endpoints = backend_endpoints(args, config)
        client = BackendClient(endpoints, timeout=_pick(args.timeout, config, "timeout", 120.0))

        def run(plan):
            try:
                return dispatch_plan(plan, client).to_dict()
            except DispatchError as exc:
                return {"plan_id": plan.plan_id,
                        "error": {"code": _error_code(exc), "message": str(exc)}}

        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            results = list(pool.map(run, plans))
        jsonl.write_jsonl(args.results, results)
        bad = sum("error" in r for r in results)
        failed += bad
        print(f"wrote {len(results)} results to {args.results} ({bad} failed)", file=sys.stderr)

    return EXIT_PARTIAL if failed else EXIT_OK


# --- mock-backend ------------------------------------------------------------

def cmd_mock_backend(args, config) -> int:
    try:
        server = MockBackend(
            port=args.port, host=args.host, fail_mode=args.fail_mode,
            latency=args.latency, dump_path=args.dump_log,
            required_resolution=args.required_resolution,
        )
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.dump_log:
        Path(args.dump_log).write_text("", encoding="utf-8")
    signal.signal(signal.SIGTERM, lambda *_: sys.exit(0))
    print(f"mock backend listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except (KeyboardInterrupt, SystemExit):
        pass
    finally:
        server.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viewinstruct", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with run configuration")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instruction dataset")
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mix", help="task weights, e.g. I-around=1,I-degree=2")
    p.add_argument("--out", default="dataset.jsonl")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("answer", help="run a model adapter over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--adapter", choices=("oracle", "corrupt", "remote"))
    p.add_argument("--seed", type=int)
    p.add_argument("--p-task-flip", type=float)
    p.add_argument("--p-azimuth-jitter", type=float)
    p.add_argument("--jitter-deg", type=float)
    p.add_argument("--p-caption-shuffle", type=float)
    p.add_argument("--endpoint", help="remote adapter URL")
    p.add_argument("--timeout", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="responses.jsonl")
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("eval", help="score responses against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--report", default="report.json")
    p.add_argument("--table", help="also write the rendered table here")
    p.add_argument("--figure", help="render a bar chart (PNG/PDF/SVG by extension)")
    p.add_argument("--embedding-endpoint", help="remote caption-embedding service URL")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="build generation plans and dispatch them")
    p.add_argument("--dataset", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--plans", default="plans.jsonl")
    p.add_argument("--errors", help="skipped-record log (default: <plans>.errors.jsonl)")
    p.add_argument("--results", default="results.jsonl")
    p.add_argument("--dry-run", action="store_true")
    p.add_argument("--backend", action="append", metavar="NAME=URL")
    p.add_argument("--elevation", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("mock-backend", help="serve the mock diffusion backend")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--fail-mode", choices=FAIL_MODES, default="none")
    p.add_argument("--latency", type=float, default=0.0)
    p.add_argument("--required-resolution", type=int, default=256)
    p.add_argument("--dump-log", help="append every received plan to this JSON-lines file")
    p.set_defaults(func=cmd_mock_backend)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
