"""Minimal JSON-over-HTTP POST client shared by remote adapters and backends."""

from __future__ import annotations

import json
import socket
import urllib.error
import urllib.request

from . import jsonl


class WireError(Exception):
    pass


class WireUnavailable(WireError):
    pass


class WireTimeout(WireError):
    pass


class WireRejected(WireError):
    def __init__(self, status: int, body):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body}")


def post_json(url: str, payload: dict, timeout: float) -> dict:
    data = jsonl.dumps(payload).encode("utf-8")
    req = urllib.request.Request(
        url, data=data, method="POST", headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        body = _decode_body(exc.read())
        if exc.code in (502, 503, 504):
            raise WireUnavailable(f"{url}: HTTP {exc.code}") from None
        raise WireRejected(exc.code, body) from None
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise WireTimeout(f"{url}: timed out after {timeout}s") from None
        raise WireUnavailable(f"{url}: {exc.reason}") from None
    except (socket.timeout, TimeoutError):
        raise WireTimeout(f"{url}: timed out after {timeout}s") from None
    except (ConnectionError, OSError) as exc:
        raise WireUnavailable(f"{url}: {exc}") from None
    body = _decode_body(raw)
    if not isinstance(body, dict):
        raise WireRejected(200, body)
    return body


def _decode_body(raw: bytes):
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return raw.decode("utf-8", "replace")
