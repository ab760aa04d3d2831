"""Suggestion sources: a deterministic mock oracle and a remote multimodal model client.

Every provider turns a list of context entries (objects with ``placement``
and ``hpwl``) into a list of SuggestionSets, one per candidate.
"""

from __future__ import annotations

import abc
import base64
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .netlist import Netlist, Placement, select_guidance_macros
from .regions import Region, SuggestionSet, parse_response

log = logging.getLogger(__name__)

TOKEN_ENV = "MACROEVO_VLM_TOKEN"
ENDPOINT_ENV = "MACROEVO_VLM_ENDPOINT"


class ProviderError(RuntimeError):
    """Any failure to obtain suggestions; the evolution loop degrades to unguided."""


class ProviderConfigError(ProviderError):
    pass


class ProviderAuthError(ProviderError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    temperature: float = 0.7
    top_k: int = 64
    top_p: float = 0.95
    candidates: int = 8
    endpoint: str | None = None  # falls back to $MACROEVO_VLM_ENDPOINT
    token_env: str = TOKEN_ENV
    timeout: float = 120.0
    attempts: int = 3
    backoff: float = 2.0

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError("candidates must be >= 1")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")

    def resolved_endpoint(self) -> str:
        url = self.endpoint or os.environ.get(ENDPOINT_ENV)
        if not url:
            raise ProviderConfigError(f"no endpoint configured (set {ENDPOINT_ENV})")
        return url

    def token(self) -> str:
        tok = os.environ.get(self.token_env)
        if not tok:
            raise ProviderConfigError(f"auth token missing: environment variable {self.token_env} is not set")
        return tok


class SuggestionProvider(abc.ABC):
    @abc.abstractmethod
    def suggest(self, context: Sequence, n: Netlist, seed: int = 0) -> list[SuggestionSet]:
        ...


def context_digest(context: Sequence) -> str:
    """Stable hash of the context entries' HPWLs and placements."""
    h = hashlib.sha256()
    for e in context:
        h.update(np.float64(e.hpwl).tobytes())
        h.update(np.ascontiguousarray(e.placement.x, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(e.placement.y, dtype=np.float64).tobytes())
    return h.hexdigest()


class MockOracle(SuggestionProvider):
    """Jittered regions around a known target layout.

    The noise radius is ``ceil(radius * min(1, gap / gap_scale))`` grid
    cells, where ``gap`` is the relative HPWL gap between the best context
    entry and the target, so guidance sharpens as the population improves.
    Each region is the macro's footprint at the target shifted by a jitter
    ``j`` in ``[-r, r]`` per axis, grown by ``r + |j|`` on every side and
    clipped to the grid. It always contains the target cell, ``radius=0``
    pins every macro to its target and a radius of the grid size spans the
    whole canvas.
    """

    def __init__(self, target: Placement, target_hpwl: float, radius: int = 0,
                 gap_scale: float = 0.25, candidates: int = 8, limit: int = 256):
        if radius < 0 or gap_scale <= 0 or candidates < 1:
            raise ValueError("radius >= 0, gap_scale > 0 and candidates >= 1 required")
        self.target = target
        self.target_hpwl = float(target_hpwl)
        self.radius = int(radius)
        self.gap_scale = float(gap_scale)
        self.candidates = int(candidates)
        self.limit = limit

    def noise_radius(self, context: Sequence) -> int:
        if self.radius == 0:
            return 0
        if not context:
            return self.radius
        best = min(float(e.hpwl) for e in context)
        gap = max(0.0, best - self.target_hpwl) / max(abs(self.target_hpwl), 1e-12)
        return int(math.ceil(self.radius * min(1.0, gap / self.gap_scale)))

    def target_cell(self, n: Netlist, i: int) -> tuple[int, int]:
        return (int(round((self.target.x[i] - n.canvas_x) / n.pitch_x)),
                int(round((self.target.y[i] - n.canvas_y) / n.pitch_y)))

    def suggest(self, context: Sequence, n: Netlist, seed: int = 0) -> list[SuggestionSet]:
        r = self.noise_radius(context)
        rng = np.random.default_rng([int(seed), int(context_digest(context)[:16], 16)])
        cols, rows = n.grid
        macros = select_guidance_macros(n, self.limit)
        out = []
        for j in range(self.candidates):
            regions = {}
            for i in macros:
                tx, ty = self.target_cell(n, i)
                fw, fh = n.footprint(i)
                jx, jy = (rng.integers(-r, r + 1, size=2) if r else (0, 0))
                px, py = r + abs(int(jx)), r + abs(int(jy))
                x1, y1 = max(0, tx + jx - px), max(0, ty + jy - py)
                x2, y2 = min(cols, tx + jx + fw + px), min(rows, ty + jy + fh + py)
                regions[i] = Region(int(x1), int(y1), int(x2), int(y2))
            out.append(SuggestionSet(regions, j, "mock"))
        return out


# ---------------------------------------------------------------------------
# remote client


def request_digest(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


class Transport(abc.ABC):
    @abc.abstractmethod
    def send(self, url: str, headers: dict, body: dict, timeout: float) -> dict:
        ...


class HTTPTransport(Transport):
    def send(self, url, headers, body, timeout):
        import requests

        try:
            resp = requests.post(url, headers=headers, json=body, timeout=timeout)
        except requests.RequestException as exc:
            raise ProviderError(f"network error: {exc}") from exc
        if resp.status_code in (401, 403):
            raise ProviderAuthError(f"authentication rejected (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError("reply is not JSON") from exc


class RecordingTransport(Transport):
    """Forward to ``inner`` and append each exchange to a JSONL fixture."""

    def __init__(self, inner: Transport, path: str):
        self.inner = inner
        self.path = path

    def send(self, url, headers, body, timeout):
        reply = self.inner.send(url, headers, body, timeout)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"digest": request_digest(body), "request": body, "response": reply},
                                sort_keys=True) + "\n")
        return reply


class ReplayTransport(Transport):
    """Serve recorded replies by request digest; never touches the network."""

    def __init__(self, path: str):
        self.path = path
        self.records: dict[str, dict] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.records.setdefault(rec["digest"], rec["response"])

    def send(self, url, headers, body, timeout):
        d = request_digest(body)
        if d not in self.records:
            raise ProviderError(f"no recorded reply for request {d[:12]} in {self.path}")
        return self.records[d]


def build_request(bundle, cfg: ProviderConfig) -> dict:
    """generateContent-style body: ordered text and inline PNG parts plus sampling settings."""
    parts = []
    for block in bundle.blocks:
        if block.kind == "text":
            parts.append({"text": block.content})
        else:
            parts.append({"inline_data": {"mime_type": "image/png",
                                          "data": base64.b64encode(block.content).decode("ascii")}})
    return {
        "contents": [{"role": "user", "parts": parts}],
        "generationConfig": {"temperature": cfg.temperature, "topK": cfg.top_k,
                             "topP": cfg.top_p, "candidateCount": cfg.candidates},
    }


def extract_texts(reply: dict) -> list[str]:
    try:
        cands = reply["candidates"]
        texts = ["".join(p.get("text", "") for p in c["content"]["parts"]) for c in cands]
    except (KeyError, TypeError) as exc:
        raise ProviderError(f"malformed reply: {exc!r}") from exc
    return texts


class RemoteVLMClient:
    """One request per query carrying the prompt and sampling settings."""

    def __init__(self, cfg: ProviderConfig, transport: Transport | None = None,
                 sleep: Callable[[float], None] = time.sleep, require_token: bool = True):
        self.cfg = cfg
        self.transport = transport or HTTPTransport()
        self.sleep = sleep
        self.require_token = require_token
        self.calls = 0

    def generate(self, bundle) -> list[str]:
        headers = {"Content-Type": "application/json"}
        if self.require_token:
            headers["Authorization"] = f"Bearer {self.cfg.token()}"
        url = self.cfg.endpoint or os.environ.get(ENDPOINT_ENV) or ""
        if not url and isinstance(self.transport, HTTPTransport):
            url = self.cfg.resolved_endpoint()
        body = build_request(bundle, self.cfg)
        last = None
        for attempt in range(self.cfg.attempts):
            if attempt:
                self.sleep(self.cfg.backoff * 2 ** (attempt - 1))
            self.calls += 1
            try:
                texts = extract_texts(self.transport.send(url, headers, body, self.cfg.timeout))
                return texts[: self.cfg.candidates]
            except ProviderAuthError:
                raise
            except ProviderError as exc:
                last = exc
                log.warning("provider attempt %d/%d failed: %s", attempt + 1, self.cfg.attempts, exc)
        raise ProviderError(f"giving up after {self.cfg.attempts} attempts: {last}")


@dataclass
class RemoteProvider(SuggestionProvider):
    """Build a prompt from the context, query the model, parse each candidate."""

    client: RemoteVLMClient
    prompt_factory: Callable  # (context, n) -> PromptBundle
    warnings: list[str] = field(default_factory=list)

    def suggest(self, context, n, seed=0):
        bundle = self.prompt_factory(context, n)
        out = []
        for j, text in enumerate(self.client.generate(bundle)):
            sset, warns = parse_response(text, n, n.grid, candidate_index=j, source="remote")
            self.warnings.extend(f"candidate {j}: {w}" for w in warns)
            out.append(sset)
        return out
