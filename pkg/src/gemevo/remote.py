"""Minimal JSON-over-HTTP client shared by the remote oracle adapters."""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request

from .core import OracleFailure

log = logging.getLogger(__name__)


def env_endpoint(url_var: str, key_var: str) -> tuple[str, str | None]:
    url = os.environ.get(url_var)
    if not url:
        raise OracleFailure(f"environment variable {url_var} is not set")
    return url, os.environ.get(key_var)


def post_json(url: str, payload: dict, key: str | None = None, timeout: float = 60.0,
              retries: int = 2, backoff: float = 0.5) -> dict:
    body = json.dumps(payload).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if key:
        headers["Authorization"] = f"Bearer {key}"
    last = None
    for attempt in range(retries + 1):
        req = urllib.request.Request(url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, OSError) as exc:
            last = exc
            log.warning("POST %s failed (attempt %d/%d): %s", url, attempt + 1, retries + 1, exc)
            if attempt < retries:
                time.sleep(backoff * 2 ** attempt)
    raise OracleFailure(f"request to {url} failed after {retries + 1} attempts: {last}")
