"""Backends that propose actions: a remote chat-completion client and a scripted mock.

The action-proposing policy is consulted for four things: the greedy/explore
mode decision, a list of candidate actions, a single greedy action, and
(optionally) an exploration parameter. All replies are plain text; this
module owns the parsing and the canonical normalization of action strings.

Candidate log-probability acquisition has two paths:

* rescoring (default when the backend supports it): each candidate's exact
  text is force-decoded under the same context and its per-token
  log-probabilities are used directly;
* slicing: the list-generation reply's own token log-probabilities are cut
  at line boundaries, excluding separator and bullet tokens.

Rescoring is preferred because sliced log-probabilities still contain list
formatting noise. A backend with neither capability yields flat candidates
(a single 0.0 log-probability each), which downstream scoring turns into a
uniform sampling distribution.
"""

from __future__ import annotations

import json
import math
import os
import re
import time
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .lambda_control import extract_json_object
from .prompts import candidate_generation, mode_decision
from .scoring import CandidateAction


class BackendError(Exception):
    """Transport or protocol failure talking to the policy backend."""


class MockScriptError(RuntimeError):
    """The scripted mock was driven outside its script."""


class ScriptExhaustedError(MockScriptError):
    """No scripted reply left for the requested prompt kind."""


class PromptKind(Enum):
    MODE_DECISION = "mode"
    CANDIDATE_LIST = "candidates"
    GREEDY_ACTION = "greedy"
    LAMBDA_DECISION = "lambda"
    MAB_ANSWER = "answer"


class Mode(Enum):
    GREEDY = "GREEDY"
    EXPLORE = "EXPLORE"


@dataclass(frozen=True)
class PolicyRequest:
    """One call to the policy: message context, sampling temperature, prompt kind."""

    context: tuple[dict, ...]
    temperature: float
    max_candidates: int = 1
    prompt_kind: PromptKind = PromptKind.GREEDY_ACTION

    def __post_init__(self) -> None:
        object.__setattr__(self, "context", tuple(self.context))
        if len(self.context) == 0:
            raise ValueError("request context must be non-empty")
        t = float(self.temperature)
        if not math.isfinite(t) or t < 0.0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature!r}")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")


@dataclass
class PolicyReply:
    """Raw completion text, optional (token, logprob) pairs, and a token count."""

    text: str
    token_logprobs: list[tuple[str, float]] | None = None
    token_count: int = 0

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise ValueError("token_count must be >= 0")


class PolicyBackend:
    """Base class for policy backends; subclasses implement :meth:`complete`.

    ``tokens_used`` is a simple cumulative completion-token counter.
    """

    tokens_used: int = 0

    def complete(self, request: PolicyRequest) -> PolicyReply:
        raise NotImplementedError

    @property
    def supports_rescoring(self) -> bool:
        return False

    def rescore(self, context: Sequence[dict], text: str) -> list[float]:
        """Per-token log-probabilities of ``text`` force-decoded under ``context``."""
        raise NotImplementedError(f"{type(self).__name__} does not support rescoring")

    def _count(self, reply: PolicyReply) -> PolicyReply:
        self.tokens_used += reply.token_count
        return reply


# --- action-string normalization ------------------------------------------

_BULLET_RE = re.compile(r"^(?:[-*>•]+|\(?\d+[.):\]])\s*")
_QUOTE_PAIRS = {('"', '"'), ("'", "'"), ("`", "`"), ("“", "”"), ("‘", "’")}


def _strip_decorations(line: str) -> tuple[str, int]:
    """Strip outer whitespace, leading bullets/numbering, and surrounding quotes.

    Returns the stripped core and its start offset in the original string,
    so callers can map the core back to token positions.
    """
    start = 0
    end = len(line)
    changed = True
    while changed:
        changed = False
        while start < end and line[start].isspace():
            start += 1
            changed = True
        while end > start and line[end - 1].isspace():
            end -= 1
            changed = True
        m = _BULLET_RE.match(line[start:end])
        if m and m.end() > 0:
            start += m.end()
            changed = True
        if end - start >= 2 and (line[start], line[end - 1]) in _QUOTE_PAIRS:
            start += 1
            end -= 1
            changed = True
    return line[start:end], start


def normalize_action(text: str) -> str:
    """Canonical action form: decorations stripped, lowercased, whitespace collapsed.

    Idempotent: normalizing a normalized string is a no-op.
    """
    core, _ = _strip_decorations(text)
    return " ".join(core.lower().split())


# --- reply parsing ----------------------------------------------------------


def parse_mode_reply(text: str) -> Mode:
    """Strict-JSON mode parse; anything that is not exactly EXPLORE means GREEDY."""
    obj = extract_json_object(text)
    if obj is not None and obj.get("mode") == "EXPLORE":
        return Mode.EXPLORE
    return Mode.GREEDY


def decide_mode(backend: PolicyBackend, context: Sequence[dict], temperature: float = 0.2) -> Mode:
    """Ask the policy whether to act greedily or explore."""
    messages = list(context) + [{"role": "user", "content": mode_decision()}]
    reply = backend.complete(
        PolicyRequest(tuple(messages), temperature, 1, PromptKind.MODE_DECISION)
    )
    return parse_mode_reply(reply.text)


def _token_spans(token_logprobs: list[tuple[str, float]]) -> list[tuple[int, int, float]]:
    spans = []
    pos = 0
    for token, lp in token_logprobs:
        spans.append((pos, pos + len(token), lp))
        pos += len(token)
    return spans


def _sliced_line_logprobs(
    reply: PolicyReply, line_spans: list[tuple[int, int]]
) -> list[list[float]] | None:
    """Cut the reply's token log-probabilities at line boundaries.

    Tokens are assigned to a line when their span overlaps the line's content
    region (the part that survives decoration stripping), so newline and
    bullet tokens drop out. Returns None when the token stream does not
    reproduce the reply text.
    """
    if not reply.token_logprobs:
        return None
    if "".join(tok for tok, _ in reply.token_logprobs) != reply.text:
        return None
    spans = _token_spans(reply.token_logprobs)
    out: list[list[float]] = [[] for _ in line_spans]
    for tok_start, tok_end, lp in spans:
        for i, (start, end) in enumerate(line_spans):
            if tok_start < end and tok_end > start:
                out[i].append(lp)
                break
    return out


def _candidate_logprobs(
    backend: PolicyBackend,
    context: Sequence[dict],
    reply: PolicyReply,
    kept: list[tuple[str, tuple[int, int]]],
) -> list[list[float]]:
    if backend.supports_rescoring:
        return [list(backend.rescore(context, text)) for text, _ in kept]
    sliced = _sliced_line_logprobs(reply, [span for _, span in kept])
    if sliced is not None:
        return [lps if lps else [0.0] for lps in sliced]
    # No log-probability source: flat candidates, scored uniformly downstream.
    return [[0.0] for _ in kept]


def generate_candidates(
    backend: PolicyBackend,
    context: Sequence[dict],
    n_candidates: int = 20,
    temperature: float = 0.7,
) -> list[CandidateAction]:
    """Request a list of candidate actions, one per line, and normalize them.

    Lines are stripped of bullets/numbering/quotes, lowercased, and
    de-duplicated preserving first occurrence; at most ``n_candidates`` are
    returned. An unparseable (all-empty) reply yields an empty list.
    """
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    messages = list(context) + [{"role": "user", "content": candidate_generation(n_candidates)}]
    reply = backend.complete(
        PolicyRequest(tuple(messages), temperature, n_candidates, PromptKind.CANDIDATE_LIST)
    )

    kept: list[tuple[str, tuple[int, int]]] = []
    seen: set[str] = set()
    offset = 0
    for raw_line in reply.text.split("\n"):
        core, start = _strip_decorations(raw_line)
        text = " ".join(core.lower().split())
        if text and text not in seen:
            seen.add(text)
            kept.append((text, (offset + start, offset + start + len(core))))
        offset += len(raw_line) + 1
    kept = kept[:n_candidates]
    if not kept:
        return []

    logprobs = _candidate_logprobs(backend, context, reply, kept)
    return [CandidateAction(text, tuple(lps)) for (text, _), lps in zip(kept, logprobs)]


def greedy_action(
    backend: PolicyBackend,
    context: Sequence[dict],
    prompt_kind: PromptKind = PromptKind.GREEDY_ACTION,
) -> CandidateAction:
    """Decode a single action at temperature 0 and normalize it."""
    reply = backend.complete(PolicyRequest(tuple(context), 0.0, 1, prompt_kind))
    text = ""
    for line in reply.text.split("\n"):
        text = normalize_action(line)
        if text:
            break
    if not text:
        raise BackendError("policy returned an empty greedy action")
    if backend.supports_rescoring:
        lps = list(backend.rescore(context, text))
    elif reply.token_logprobs:
        lps = [lp for _, lp in reply.token_logprobs]
    else:
        lps = [0.0]
    return CandidateAction(text, tuple(lps))


# --- deterministic scripted mock -------------------------------------------

_KIND_ALIASES = {kind.value: kind for kind in PromptKind}


@dataclass(frozen=True)
class ScriptEntry:
    """One scripted reply, matched to requests by prompt kind."""

    kind: PromptKind
    text: str
    token_logprobs: tuple[tuple[str, float], ...] | None = None
    token_count: int | None = None

    @classmethod
    def mode(cls, value: str) -> "ScriptEntry":
        return cls(PromptKind.MODE_DECISION, json.dumps({"mode": value}, separators=(",", ":")))

    @classmethod
    def candidates(cls, lines: Sequence[str], token_logprobs=None) -> "ScriptEntry":
        return cls(
            PromptKind.CANDIDATE_LIST,
            "\n".join(lines),
            tuple((t, float(lp)) for t, lp in token_logprobs) if token_logprobs else None,
        )

    @classmethod
    def greedy(cls, text: str) -> "ScriptEntry":
        return cls(PromptKind.GREEDY_ACTION, text)

    @classmethod
    def lambda_value(cls, value: float) -> "ScriptEntry":
        return cls(PromptKind.LAMBDA_DECISION, json.dumps({"lambda": value}, separators=(",", ":")))

    @classmethod
    def answer(cls, color: str) -> "ScriptEntry":
        return cls(PromptKind.MAB_ANSWER, f"<Answer>I will press {color} button</Answer>")

    def to_reply(self) -> PolicyReply:
        lps = list(self.token_logprobs) if self.token_logprobs is not None else None
        if self.token_count is not None:
            count = self.token_count
        elif lps is not None:
            count = len(lps)
        else:
            count = len(self.text.split())
        return PolicyReply(self.text, lps, count)


class MockPolicy(PolicyBackend):
    """Replays scripted replies deterministically, one queue per prompt kind.

    With ``loop=False`` (the default) running past the script raises
    :class:`ScriptExhaustedError` so tests fail loudly; ``loop=True`` cycles
    each queue, which keeps long harness runs scriptable with short files.
    An instance drives at most one episode at a time; its ``calls`` log makes
    per-kind call accounting assertable.
    """

    def __init__(
        self,
        entries: Sequence[ScriptEntry],
        rescores: dict[str, Sequence[float]] | None = None,
        loop: bool = False,
    ) -> None:
        self.tokens_used = 0
        self.loop = loop
        self.calls: list[PromptKind] = []
        self.rescore_calls: int = 0
        self._scripted: dict[PromptKind, list[ScriptEntry]] = {kind: [] for kind in PromptKind}
        for entry in entries:
            self._scripted[entry.kind].append(entry)
        self._cursor: dict[PromptKind, int] = {kind: 0 for kind in PromptKind}
        self._rescores = (
            {normalize_action(k): [float(x) for x in v] for k, v in rescores.items()}
            if rescores is not None
            else None
        )

    @classmethod
    def from_file(cls, path) -> "MockPolicy":
        with open(path, "r", encoding="utf-8") as fp:
            spec = json.load(fp)
        entries = []
        for item in spec.get("entries", []):
            kind = _KIND_ALIASES.get(item.get("kind"))
            if kind is None:
                raise MockScriptError(f"unknown script entry kind {item.get('kind')!r} in {path}")
            lps = item.get("token_logprobs")
            entries.append(
                ScriptEntry(
                    kind,
                    item["text"],
                    tuple((t, float(lp)) for t, lp in lps) if lps else None,
                    item.get("token_count"),
                )
            )
        return cls(entries, spec.get("rescores"), bool(spec.get("loop", False)))

    @property
    def call_counts(self) -> Counter:
        return Counter(self.calls)

    @property
    def supports_rescoring(self) -> bool:
        return self._rescores is not None

    def rescore(self, context: Sequence[dict], text: str) -> list[float]:
        if self._rescores is None:
            raise NotImplementedError("mock has no rescore table")
        self.rescore_calls += 1
        key = normalize_action(text)
        if key not in self._rescores:
            raise MockScriptError(f"no scripted rescore for action {key!r}")
        return list(self._rescores[key])

    def complete(self, request: PolicyRequest) -> PolicyReply:
        self.calls.append(request.prompt_kind)
        queue = self._scripted[request.prompt_kind]
        index = self._cursor[request.prompt_kind]
        if index >= len(queue):
            if self.loop and queue:
                index = 0
            else:
                raise ScriptExhaustedError(
                    f"script exhausted for {request.prompt_kind.value!r} "
                    f"(served {len(queue)} replies)"
                )
        self._cursor[request.prompt_kind] = index + 1
        return self._count(queue[index].to_reply())


# --- remote chat-completion client ------------------------------------------

ENV_API_BASE = "DORA_API_BASE"
ENV_API_KEY = "DORA_API_KEY"
ENV_MODEL = "DORA_MODEL"


class RemotePolicy(PolicyBackend):
    """Minimal JSON client for chat-completion style endpoints.

    Configuration comes from arguments or the ``DORA_API_BASE`` /
    ``DORA_API_KEY`` / ``DORA_MODEL`` environment variables. Requests carry
    {model, messages, temperature, max_tokens, logprobs}; responses are read
    for message content and, when present, token-level log-probabilities.
    Transient transport failures are retried twice with exponential backoff,
    then surfaced as :class:`BackendError`.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        max_tokens: int = 256,
        request_logprobs: bool = True,
        timeout: float = 60.0,
        max_retries: int = 2,
        backoff: float = 0.5,
    ) -> None:
        self.tokens_used = 0
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.base_url or not self.model:
            raise ValueError(
                f"remote backend needs {ENV_API_BASE} and {ENV_MODEL} "
                "(environment variables or constructor arguments)"
            )
        self.max_tokens = max_tokens
        self.request_logprobs = request_logprobs
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def _post(self, payload: dict) -> dict:
        import requests

        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(url, json=payload, headers=headers, timeout=self.timeout)
                if resp.status_code >= 500:
                    raise requests.RequestException(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise BackendError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
                return resp.json()
            except BackendError:
                raise
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        raise BackendError(f"transport failed after {self.max_retries + 1} attempts: {last_error}")

    def complete(self, request: PolicyRequest) -> PolicyReply:
        payload = {
            "model": self.model,
            "messages": [dict(m) for m in request.context],
            "temperature": request.temperature,
            "max_tokens": self.max_tokens,
            "logprobs": self.request_logprobs,
        }
        data = self._post(payload)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion response: {exc}") from exc
        token_logprobs = None
        logprob_block = (choice.get("logprobs") or {}).get("content")
        if logprob_block:
            try:
                token_logprobs = [(item["token"], float(item["logprob"])) for item in logprob_block]
            except (KeyError, TypeError, ValueError):
                token_logprobs = None
        usage = data.get("usage") or {}
        token_count = int(
            usage.get("completion_tokens")
            or (len(token_logprobs) if token_logprobs else len(text.split()))
        )
        return self._count(PolicyReply(text, token_logprobs, token_count))
