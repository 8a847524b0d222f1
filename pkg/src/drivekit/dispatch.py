"""Send caption prompts to a chat-completion style HTTP endpoint.

Request body: ``{"model": ..., "messages": [{"role": "user", "content": prompt}]}``.
The response text is read from ``choices[0].message.content``. Offline mode
writes one prompt file per frame instead of touching the network.
"""

from __future__ import annotations

import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import httpx

from .config import EndpointConfig
from .pipeline import CaptionPrompt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PromptResponse:
    frame_id: str
    text: Optional[str]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _safe_name(frame_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", frame_id)


def write_offline(prompts: Sequence[CaptionPrompt], out_dir: Path) -> List[Path]:
    """Write ``<frame_id>.txt`` per prompt; returns the paths in prompt order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in prompts:
        path = out_dir / f"{_safe_name(p.frame_id)}.txt"
        path.write_text(p.prompt + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def _extract_text(payload) -> str:
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ValueError("response has no choices[0].message.content") from None
    if not isinstance(content, str):
        raise ValueError("response content is not text")
    return content


def dispatch_prompts(prompts: Sequence[CaptionPrompt], endpoint: EndpointConfig,
                     client: Optional[httpx.Client] = None, api_key: Optional[str] = None,
                     sleep: Callable[[float], None] = time.sleep) -> List[PromptResponse]:
    """Post every prompt; failures after all retries become error entries.

    At most ``endpoint.max_in_flight`` requests run concurrently. Output
    order matches ``prompts``.
    """
    if not endpoint.url:
        raise ValueError("endpoint url is not configured")
    if api_key is None:
        api_key = os.environ.get(endpoint.api_key_env)
    headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
    owns_client = client is None
    if client is None:
        client = httpx.Client(timeout=endpoint.timeout_seconds)

    def one(prompt: CaptionPrompt) -> PromptResponse:
        body = {"model": endpoint.model, "messages": [{"role": "user", "content": prompt.prompt}]}
        last_error = "no attempt made"
        for attempt in range(max(1, endpoint.max_attempts)):
            if attempt:
                sleep(endpoint.backoff_seconds * 2 ** (attempt - 1))
            try:
                resp = client.post(endpoint.url, json=body, headers=headers)
                resp.raise_for_status()
                return PromptResponse(prompt.frame_id, _extract_text(resp.json()))
            except (httpx.HTTPError, ValueError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("frame %s attempt %d failed: %s", prompt.frame_id, attempt + 1, last_error)
        return PromptResponse(prompt.frame_id, None, last_error)

    try:
        with ThreadPoolExecutor(max_workers=max(1, endpoint.max_in_flight)) as pool:
            return list(pool.map(one, prompts))
    finally:
        if owns_client:
            client.close()
