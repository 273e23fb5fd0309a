"""Per-step explore/greedy orchestration and episode running.

One step: build the context from history and the current observation,
ask the policy whether to be greedy or to explore; when exploring, pick a
lambda (scheduled or policy-sampled), generate candidates, drop the ones
already tried under this observation, score the rest, and sample from the
lambda-softmax; otherwise decode one greedy action. The chosen action is
always recorded in the per-observation used-action set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import prompts
from .lambda_control import LambdaSource, ScheduledLambda, extract_lambda, lambda_exp
from .policy import (
    BackendError,
    Mode,
    PolicyBackend,
    PolicyRequest,
    PromptKind,
    decide_mode,
    generate_candidates,
    greedy_action,
)
from .scoring import ScoreParams, lambda_probabilities, sample_categorical, score_candidates
from .textenv import EnvError

HistoryTriple = tuple[str, str, float]
ContextBuilder = Callable[[Sequence[HistoryTriple], str, "DoraParams"], list[dict]]


class FallbackReason(Enum):
    EMPTY_CANDIDATES = "empty_candidates"
    PARSE_FAILURE = "parse_failure"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class DoraParams:
    """Hyperparameters of one agent: candidate count, temperatures, scoring weight."""

    n_candidates: int = 20
    alpha: float = 0.8
    tau_decision: float = 0.2
    tau_candidates: float = 0.7
    tau_lambda: float = 0.2
    epsilon: float = 1e-8
    history_window: int = 20
    lambda_retries: int = 1
    invalid_action: str = ""
    greedy_kind: PromptKind = PromptKind.GREEDY_ACTION
    system_prompt: str | None = None


@dataclass(frozen=True)
class ScoredCandidate:
    action: str
    score: float
    prob: float


@dataclass
class StepRecord:
    """What one step decided and why; candidates are present only in explore mode."""

    step: int
    observation: str
    mode: Mode
    chosen_action: str
    lam: float | None = None
    candidates: list[ScoredCandidate] | None = None
    fallback_reason: FallbackReason | None = None


class UsedActionRegistry:
    """Per-observation sets of actions already taken; sets only ever grow."""

    def __init__(self) -> None:
        self._sets: dict[str, set[str]] = {}

    @staticmethod
    def _key(observation: str) -> str:
        return observation.strip()

    def used(self, observation: str) -> frozenset[str]:
        return frozenset(self._sets.get(self._key(observation), ()))

    def add(self, observation: str, action: str) -> None:
        self._sets.setdefault(self._key(observation), set()).add(action)

    def size(self, observation: str) -> int:
        return len(self._sets.get(self._key(observation), ()))


def build_text_context(
    history: Sequence[HistoryTriple], observation: str, params: DoraParams
) -> list[dict]:
    """Rolling-window chat context: system prompt, recent (obs, action) turns, current obs.

    Nonzero rewards are surfaced as a bracketed line at the start of the
    following observation message.
    """
    system = params.system_prompt if params.system_prompt is not None else prompts.zero_shot()
    messages = [{"role": "system", "content": system}]
    window = history[-params.history_window :] if params.history_window > 0 else []
    pending_reward = 0.0
    for obs, action, reward in window:
        messages.append({"role": "user", "content": _with_reward(obs, pending_reward)})
        messages.append({"role": "assistant", "content": action})
        pending_reward = reward
    messages.append({"role": "user", "content": _with_reward(observation, pending_reward)})
    return messages


def _with_reward(observation: str, reward: float) -> str:
    if reward:
        return f"[reward: {reward:g}]\n{observation}"
    return observation


def _resolve_lambda(
    backend: PolicyBackend,
    context: list[dict],
    lambda_source: LambdaSource,
    params: DoraParams,
    step: int,
) -> tuple[float, bool]:
    """Return (lambda, parse_failed). Scheduled sources never fail."""
    if isinstance(lambda_source, ScheduledLambda):
        sched = lambda_source.schedule
        t = min(max(step, 0), sched.horizon)
        return lambda_exp(sched, t), False
    lo, hi = lambda_source.bounds
    messages = context + [{"role": "user", "content": prompts.lambda_decision(lo, hi)}]
    request = PolicyRequest(tuple(messages), params.tau_lambda, 1, PromptKind.LAMBDA_DECISION)
    for _ in range(params.lambda_retries + 1):
        value = extract_lambda(backend.complete(request).text)
        if value is not None:
            return min(max(value, lo), hi), False
    return lambda_source.fallback_value, True


def dora_step(
    backend: PolicyBackend,
    lambda_source: LambdaSource,
    registry: UsedActionRegistry,
    history: Sequence[HistoryTriple],
    observation: str,
    params: DoraParams,
    rng: np.random.Generator,
    step: int = 0,
    context_builder: ContextBuilder | None = None,
) -> StepRecord:
    """Run one explore-or-greedy decision step and return its full record.

    A backend failure produces a record with ``fallback_reason=BACKEND_ERROR``
    and the configured invalid action; an explore step whose candidates were
    all used before falls back to the greedy action (``EMPTY_CANDIDATES``).
    """
    if not observation:
        raise ValueError("observation must be non-empty")
    build = context_builder or build_text_context
    context = build(history, observation, params)

    mode = Mode.GREEDY
    lam: float | None = None
    fallback: FallbackReason | None = None
    try:
        mode = decide_mode(backend, context, params.tau_decision)
        if mode is Mode.EXPLORE:
            lam, parse_failed = _resolve_lambda(backend, context, lambda_source, params, step)
            if parse_failed:
                fallback = FallbackReason.PARSE_FAILURE
            candidates = generate_candidates(
                backend, context, params.n_candidates, params.tau_candidates
            )
            used = registry.used(observation)
            fresh = [c for c in candidates if c.text not in used]
            if fresh:
                scores = score_candidates(fresh, ScoreParams(params.alpha, params.epsilon))
                dist = lambda_probabilities(scores, lam)
                chosen = fresh[sample_categorical(dist, rng)]
                record = StepRecord(
                    step=step,
                    observation=observation,
                    mode=mode,
                    chosen_action=chosen.text,
                    lam=lam,
                    candidates=[
                        ScoredCandidate(c.text, float(s), float(p))
                        for c, s, p in zip(fresh, dist.scores, dist.probs)
                    ],
                    fallback_reason=fallback,
                )
            else:
                chosen = greedy_action(backend, context, params.greedy_kind)
                record = StepRecord(
                    step=step,
                    observation=observation,
                    mode=mode,
                    chosen_action=chosen.text,
                    lam=lam,
                    candidates=[],
                    fallback_reason=FallbackReason.EMPTY_CANDIDATES,
                )
        else:
            chosen = greedy_action(backend, context, params.greedy_kind)
            record = StepRecord(
                step=step, observation=observation, mode=mode, chosen_action=chosen.text
            )
    except BackendError:
        return StepRecord(
            step=step,
            observation=observation,
            mode=mode,
            chosen_action=params.invalid_action,
            lam=lam if mode is Mode.EXPLORE else None,
            candidates=None,
            fallback_reason=FallbackReason.BACKEND_ERROR,
        )

    registry.add(observation, record.chosen_action)
    return record


@dataclass
class EpisodeLog:
    """Ordered step records plus the observation/reward streams of one episode.

    ``observations`` holds every observation the agent received: the reset
    observation followed by the result of each step, so it is one longer
    than ``steps`` unless the episode aborted.
    """

    steps: list[StepRecord] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    observations: list[str] = field(default_factory=list)
    terminal: bool = False
    truncated: bool = False
    partial: bool = False
    score: float = 0.0
    token_count: int = 0
    seed: int | None = None

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def num_steps(self) -> int:
        return len(self.steps)


def run_episode(
    backend: PolicyBackend,
    env,
    lambda_source: LambdaSource,
    params: DoraParams,
    max_steps: int,
    rng: np.random.Generator,
    context_builder: ContextBuilder | None = None,
    seed: int | None = None,
) -> EpisodeLog:
    """Drive the agent against ``env`` until terminal or ``max_steps``.

    The environment contract is ``reset(seed) -> observation`` and
    ``step(action) -> TextEnvStep``. Environment errors abort the episode
    with the log flagged as partial.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps!r}")

    observation = env.reset(seed)
    registry = UsedActionRegistry()
    history: list[HistoryTriple] = []
    log = EpisodeLog(observations=[observation], seed=seed)
    tokens_before = backend.tokens_used

    for t in range(max_steps):
        record = dora_step(
            backend,
            lambda_source,
            registry,
            history,
            observation,
            params,
            rng,
            step=t,
            context_builder=context_builder,
        )
        log.steps.append(record)
        try:
            result = env.step(record.chosen_action)
        except EnvError:
            log.partial = True
            break
        log.rewards.append(result.reward)
        log.observations.append(result.observation)
        log.score = result.score
        history.append((observation, record.chosen_action, result.reward))
        observation = result.observation
        if result.terminal:
            log.terminal = True
            break

    log.truncated = not log.terminal and not log.partial
    log.token_count = backend.tokens_used - tokens_before
    return log
