"""Post-processing: route answers to a diffusion backend and execute plans.

A :class:`GenerationPlan` is the backend-ready request built from a parsed
answer. Plans travel as one JSON POST per plan::

    {plan_id, backend, cameras: [{azimuth, elevation, radius}], caption?, image_ref?, resolution}

and the backend replies ``{plan_id, images: [{azimuth, uri}]}`` or
``{plan_id, error: {code, message}}``. For ``zero123`` the first camera is
the reference view and only the second is synthesized.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Mapping, Sequence

from . import jsonl, wire
from .answer import Answer, Issue, validate_answer
from .geometry import degrees_to_json, format_degrees, quantize_azimuth
from .tasks import TaskGroup, TaskKind
from .templates import TaskParams

DEFAULT_RESOLUTION = 256
DEFAULT_TIMEOUT = 120.0


class BackendId(str, Enum):
    IMAGEDREAM = "imagedream"
    MVDREAM = "mvdream"
    ZERO123 = "zero123"


_ROUTES = {
    TaskGroup.IMAGE_BASED: BackendId.IMAGEDREAM,
    TaskGroup.CAPTION_BASED: BackendId.MVDREAM,
    TaskGroup.RELATED_VIEW: BackendId.ZERO123,
}


def route(task: TaskKind) -> BackendId:
    return _ROUTES[TaskKind(task).group]


@dataclass(frozen=True)
class CameraConfig:
    elevation: float = 0.0
    radius: float = 1.5
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if not (math.isfinite(self.elevation) and -90.0 <= self.elevation <= 90.0):
            raise ValueError(f"elevation must be in [-90, 90], got {self.elevation!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        if isinstance(self.resolution, bool) or not isinstance(self.resolution, int) or self.resolution < 1:
            raise ValueError(f"resolution must be a positive integer, got {self.resolution!r}")


@dataclass(frozen=True)
class CameraSpec:
    azimuth: float
    elevation: float
    radius: float

    def to_wire(self) -> dict:
        return {
            "azimuth": degrees_to_json(self.azimuth),
            "elevation": self.elevation,
            "radius": self.radius,
        }


@dataclass(frozen=True)
class GenerationPlan:
    plan_id: str
    backend: BackendId
    cameras: tuple[CameraSpec, ...]
    caption: str | None = None
    image_ref: str | None = None
    resolution: int = DEFAULT_RESOLUTION

    @property
    def requested_cameras(self) -> tuple[CameraSpec, ...]:
        """Cameras the backend must synthesize (zero123 skips the reference view)."""
        if self.backend is BackendId.ZERO123:
            return self.cameras[1:]
        return self.cameras

    def to_wire(self) -> dict:
        out: dict = {
            "plan_id": self.plan_id,
            "backend": self.backend.value,
            "cameras": [c.to_wire() for c in self.cameras],
        }
        if self.caption is not None:
            out["caption"] = self.caption
        if self.image_ref is not None:
            out["image_ref"] = self.image_ref
        out["resolution"] = self.resolution
        return out

    @classmethod
    def from_wire(cls, data: Mapping) -> GenerationPlan:
        return cls(
            plan_id=str(data["plan_id"]),
            backend=BackendId(data["backend"]),
            cameras=tuple(
                CameraSpec(float(c["azimuth"]), float(c["elevation"]), float(c["radius"]))
                for c in data["cameras"]
            ),
            caption=data.get("caption"),
            image_ref=data.get("image_ref"),
            resolution=int(data["resolution"]),
        )


@dataclass(frozen=True)
class GenerationResult:
    plan_id: str
    images: tuple[tuple[float, str], ...]
    backend_latency: float = 0.0

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "images": [{"azimuth": degrees_to_json(a), "uri": u} for a, u in self.images],
        }


@dataclass(frozen=True)
class PlanContext:
    """What the plan builder knows about the originating record."""

    image_ref: str | None = None
    expected_task: TaskKind | None = None
    params: TaskParams | None = None
    caption: str | None = None


class PlanError(Exception):
    pass


class ContextMismatch(PlanError):
    pass


class ValidationFailed(PlanError):
    def __init__(self, violations: Sequence[Issue]):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in self.violations))


def build_plan(
    answer: Answer,
    context: PlanContext | None = None,
    config: CameraConfig | None = None,
    plan_id: str = "plan",
) -> GenerationPlan:
    context = context or PlanContext()
    config = config or CameraConfig()
    if context.expected_task is not None:
        check = validate_answer(answer, context.expected_task, context.params)
        if not check.ok:
            raise ValidationFailed(check.violations)
    elif answer.task is TaskKind.IMG_DEGREE and len(answer.azimuths) != 2:
        raise ValidationFailed([Issue("ArityViolation", "I-degree needs exactly 2 azimuths")])

    backend = route(answer.task)
    cameras = tuple(CameraSpec(a, config.elevation, config.radius) for a in answer.azimuths)
    caption = image_ref = None
    if backend is BackendId.MVDREAM:
        caption = answer.caption or context.caption
        if not caption:
            raise ContextMismatch(f"{answer.task.short_name} needs a caption for {backend.value}")
    else:
        if not context.image_ref:
            raise ContextMismatch(f"{answer.task.short_name} needs a reference image")
        image_ref = context.image_ref
        if backend is BackendId.IMAGEDREAM:
            caption = answer.caption or context.caption
    return GenerationPlan(plan_id, backend, cameras, caption, image_ref, config.resolution)


# Per-backend azimuth encoders for servers whose angle convention differs from
# absolute degrees; applied to wire payloads only, never to the plan itself.
AzimuthEncoder = Callable[[GenerationPlan, int, float], float]


def absolute_azimuth(plan: GenerationPlan, index: int, azimuth: float) -> float:
    return azimuth


def relative_to_reference(plan: GenerationPlan, index: int, azimuth: float) -> float:
    """Angle relative to the first camera, in ``(-180, 180]``."""
    delta = quantize_azimuth(azimuth - plan.cameras[0].azimuth)
    return delta - 360.0 if delta > 180.0 else delta


def serialize_plan(plan: GenerationPlan, encoder: AzimuthEncoder | None = None) -> dict:
    payload = plan.to_wire()
    if encoder is not None and encoder is not absolute_azimuth:
        for i, cam in enumerate(payload["cameras"]):
            cam["azimuth"] = degrees_to_json(encoder(plan, i, plan.cameras[i].azimuth))
    return payload


class DispatchError(Exception):
    pass


class BackendUnavailable(DispatchError):
    pass


class BackendRejected(DispatchError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class Timeout(DispatchError):
    pass


@dataclass
class BackendClient:
    endpoints: Mapping[BackendId, str]
    timeout: float = DEFAULT_TIMEOUT
    encoders: Mapping[BackendId, AzimuthEncoder] = field(default_factory=dict)

    def endpoint_for(self, backend: BackendId) -> str:
        try:
            return self.endpoints[BackendId(backend)]
        except KeyError:
            raise BackendUnavailable(f"no endpoint configured for {backend.value}") from None


def dispatch_plan(plan: GenerationPlan, client: BackendClient) -> GenerationResult:
    """Send one plan; either every requested view comes back or an error is raised."""
    url = client.endpoint_for(plan.backend)
    payload = serialize_plan(plan, client.encoders.get(plan.backend))
    t0 = time.perf_counter()
    try:
        body = wire.post_json(url, payload, client.timeout)
    except wire.WireTimeout as exc:
        raise Timeout(str(exc)) from None
    except wire.WireUnavailable as exc:
        raise BackendUnavailable(str(exc)) from None
    except wire.WireRejected as exc:
        raise BackendRejected(_error_message(exc.body)) from None
    latency = time.perf_counter() - t0

    if "error" in body:
        err = body["error"] if isinstance(body["error"], dict) else {"message": body["error"]}
        if err.get("code") == "unavailable":
            raise BackendUnavailable(str(err.get("message")))
        raise BackendRejected(str(err.get("message", err)))
    if body.get("plan_id") != plan.plan_id:
        raise BackendRejected(f"response for plan {body.get('plan_id')!r}, expected {plan.plan_id!r}")
    images = body.get("images")
    wanted = plan.requested_cameras
    if not isinstance(images, list) or len(images) != len(wanted):
        raise BackendRejected(f"expected {len(wanted)} images, got {images!r:.80}")
    out = []
    for cam, img in zip(wanted, images):
        try:
            out.append((cam.azimuth, str(img["uri"])))
        except (TypeError, KeyError):
            raise BackendRejected(f"malformed image entry {img!r:.80}") from None
    return GenerationResult(plan.plan_id, tuple(out), latency)


def _error_message(body) -> str:
    if isinstance(body, dict) and isinstance(body.get("error"), dict):
        return str(body["error"].get("message", body["error"]))
    return str(body)


FAIL_MODES = ("none", "unavailable", "reject", "reject_resolution", "timeout")


class MockBackend:
    """Threaded HTTP stand-in for the diffusion servers.

    Every POSTed plan is appended to :attr:`requests` (and to ``dump_path``
    as JSON lines, if given) under a lock. ``GET /log`` returns the log.
    """

    def __init__(
        self,
        port: int = 0,
        host: str = "127.0.0.1",
        fail_mode: str = "none",
        latency: float = 0.0,
        required_resolution: int = DEFAULT_RESOLUTION,
        hang_seconds: float = 5.0,
        dump_path: str | None = None,
    ):
        if fail_mode not in FAIL_MODES:
            raise ValueError(f"fail_mode must be one of {FAIL_MODES}, got {fail_mode!r}")
        self.fail_mode = fail_mode
        self.latency = latency
        self.required_resolution = required_resolution
        self.hang_seconds = hang_seconds
        self.dump_path = dump_path
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._server = ThreadingHTTPServer((host, port), self._make_handler())
        self._server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}/generate"

    def start(self) -> MockBackend:
        if self._thread is None:
            self._thread = threading.Thread(
                target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
            )
            self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def close(self) -> None:
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join(timeout=5)
        self._server.server_close()

    def __enter__(self) -> MockBackend:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()

    def log(self) -> list[dict]:
        with self._lock:
            return list(self.requests)

    def _record(self, payload: dict) -> None:
        with self._lock:
            self.requests.append(payload)
            if self.dump_path:
                with open(self.dump_path, "a", encoding="utf-8") as fh:
                    fh.write(jsonl.dumps(payload) + "\n")

    def respond(self, payload: dict) -> tuple[int, dict]:
        plan_id = payload.get("plan_id")
        if self.latency:
            time.sleep(self.latency)
        if self.fail_mode == "timeout":
            time.sleep(self.hang_seconds)
        if self.fail_mode == "unavailable":
            return 503, {"plan_id": plan_id, "error": {"code": "unavailable", "message": "backend offline"}}
        if self.fail_mode == "reject":
            return 422, {"plan_id": plan_id, "error": {"code": "rejected", "message": "plan rejected"}}
        try:
            plan = GenerationPlan.from_wire(payload)
        except (KeyError, TypeError, ValueError) as exc:
            return 400, {"plan_id": plan_id, "error": {"code": "rejected", "message": f"bad plan: {exc}"}}
        if self.fail_mode == "reject_resolution" and plan.resolution != self.required_resolution:
            return 422, {"plan_id": plan_id, "error": {
                "code": "rejected",
                "message": f"resolution {plan.resolution} unsupported, need {self.required_resolution}",
            }}
        images = [
            {"azimuth": degrees_to_json(c.azimuth),
             "uri": f"mock://{plan.backend.value}/{plan.plan_id}/{format_degrees(c.azimuth)}"}
            for c in plan.requested_cameras
        ]
        return 200, {"plan_id": plan.plan_id, "images": images}

    def _make_handler(self):
        backend = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, format, *args):
                pass

            def _send(self, status: int, body) -> None:
                data = jsonl.dumps(body).encode("utf-8")
                try:
                    self.send_response(status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass  # client gave up (timeout tests)

            def do_GET(self):
                if self.path.rstrip("/") == "/log":
                    self._send(200, backend.log())
                else:
                    self._send(200, {"status": "ok", "fail_mode": backend.fail_mode})

            def do_POST(self):
                length = int(self.headers.get("Content-Length") or 0)
                raw = self.rfile.read(length)
                try:
                    payload = json.loads(raw.decode("utf-8"))
                    if not isinstance(payload, dict):
                        raise ValueError("plan must be an object")
                except (UnicodeDecodeError, ValueError) as exc:
                    self._send(400, {"plan_id": None, "error": {"code": "rejected", "message": str(exc)}})
                    return
                backend._record(payload)
                status, body = backend.respond(payload)
                self._send(status, body)

        return Handler


def mock_backend_serve(
    port: int = 0, fail_mode: str = "none", latency: float = 0.0, **kwargs
) -> MockBackend:
    """Start a :class:`MockBackend` on a background thread and return it."""
    return MockBackend(port=port, fail_mode=fail_mode, latency=latency, **kwargs).start()
