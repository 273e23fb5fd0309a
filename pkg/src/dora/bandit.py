"""Bernoulli K-armed bandit lab: hard instance, classical baselines, metrics.

The hard instance gives one uniformly chosen arm mean 0.5 + gap/2 and every
other arm 0.5 - gap/2. Regret is pseudo-regret (true means), with the gap
charged as a penalty for each invalid step. A run is fully determined by
(agent, instance, seed): the instance layout, the reward stream, and any
policy randomness draw from sub-streams of the run seed.

Also here: the strict answer-envelope parsing for arm-pressing replies, the
language-model temperature baseline, a softmax-over-running-means agent
driven by a lambda schedule, and a text-environment adapter that exposes the
bandit through observation summaries for explore/greedy agents.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import prompts
from .agent import DoraParams, HistoryTriple
from .lambda_control import LambdaSchedule, lambda_exp
from .policy import BackendError, PolicyBackend, PolicyRequest, PromptKind
from .scoring import lambda_probabilities, sample_categorical

ARM_COLORS = ("blue", "green", "red", "yellow", "purple")
INVALID_PULL = -1

# Bit-exact apart from the color's case and surrounding whitespace.
_ANSWER_RE = re.compile(
    r"^\s*<Answer>I will press ((?i:blue|green|red|yellow|purple)) button</Answer>\s*$"
)
_LOOSE_PRESS_RE = re.compile(r"\bpress\s+(blue|green|red|yellow|purple)\s+button\b", re.IGNORECASE)


@dataclass(frozen=True)
class BanditInstance:
    """Arm means, the optimal arm, the horizon, and the suboptimality gap."""

    arm_means: tuple[float, ...]
    best_arm: int
    horizon: int
    gap: float

    @property
    def num_arms(self) -> int:
        return len(self.arm_means)

    @property
    def best_mean(self) -> float:
        return self.arm_means[self.best_arm]


def make_hard_instance(
    num_arms: int = 5, gap: float = 0.2, horizon: int = 200, seed: int = 0
) -> BanditInstance:
    """One uniformly random arm at 0.5 + gap/2, the rest at 0.5 - gap/2."""
    if num_arms < 2:
        raise ValueError(f"need at least 2 arms, got {num_arms!r}")
    if not (0.0 < gap < 1.0):
        raise ValueError(f"gap must lie in (0, 1), got {gap!r}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon!r}")
    rng = np.random.default_rng([seed, 0])
    best = int(rng.integers(num_arms))
    means = [0.5 - gap / 2.0] * num_arms
    means[best] = 0.5 + gap / 2.0
    return BanditInstance(tuple(means), best, horizon, gap)


@dataclass
class BanditRun:
    """Per-step pulls (INVALID_PULL for invalid steps) and binary rewards."""

    pulls: list[int]
    rewards: list[int]
    seed: int
    counts: tuple[int, ...] = field(init=False)
    sums: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        if len(self.pulls) != len(self.rewards):
            raise ValueError("pulls and rewards must be aligned")
        num_arms = max((a for a in self.pulls if a != INVALID_PULL), default=-1) + 1
        counts = [0] * num_arms
        sums = [0] * num_arms
        for arm, reward in zip(self.pulls, self.rewards):
            if arm != INVALID_PULL:
                counts[arm] += 1
                sums[arm] += reward
        self.counts = tuple(counts)
        self.sums = tuple(sums)

    @property
    def invalid_count(self) -> int:
        return sum(1 for a in self.pulls if a == INVALID_PULL)


@dataclass(frozen=True)
class BanditMetrics:
    mean_avg_reward: float
    cumulative_regret: float
    best_arm_fraction: float
    suffix_failure: bool
    invalid_count: int


def compute_metrics(run: BanditRun, instance: BanditInstance) -> BanditMetrics:
    """Table-style metrics for one run.

    Pseudo-regret sums (best mean - pulled mean) over valid pulls plus the
    gap per invalid step; the reward average divides by the horizon, so
    invalid steps count against it. Suffix failure means the best arm was
    never pulled in the second half of the horizon.
    """
    horizon = instance.horizon
    pulls = run.pulls
    regret = 0.0
    for arm in pulls:
        if arm == INVALID_PULL:
            regret += instance.gap
        else:
            regret += instance.best_mean - instance.arm_means[arm]
    best_pulls = sum(1 for a in pulls if a == instance.best_arm)
    second_half = pulls[horizon // 2 :]
    return BanditMetrics(
        mean_avg_reward=sum(run.rewards) / horizon,
        cumulative_regret=regret,
        best_arm_fraction=best_pulls / horizon,
        suffix_failure=not any(a == instance.best_arm for a in second_half),
        invalid_count=run.invalid_count,
    )


# --- answer parsing -----------------------------------------------------------


def parse_answer_envelope(text: str) -> int | None:
    """Strictly parse '<Answer>I will press COLOR button</Answer>'.

    Only the color is case-insensitive and only surrounding whitespace is
    tolerated; anything else is invalid (None).
    """
    match = _ANSWER_RE.match(text)
    if match is None:
        return None
    return ARM_COLORS.index(match.group(1).lower())


def arm_from_action(text: str) -> int | None:
    """Map an action string to an arm: strict envelope first, then a loose
    'press COLOR button' phrase (the normalized candidate form)."""
    arm = parse_answer_envelope(text)
    if arm is not None:
        return arm
    match = _LOOSE_PRESS_RE.search(text)
    if match is None:
        return None
    return ARM_COLORS.index(match.group(1).lower())


def press_action(arm: int) -> str:
    return f"press {ARM_COLORS[arm]} button"


# --- classical policies ---------------------------------------------------------


class UcbPolicy:
    """Empirical mean plus a sqrt(c / n) bonus; one initial pull of every arm."""

    def __init__(self, bonus: float = 1.0) -> None:
        self.bonus = bonus

    def reset(self, num_arms: int, horizon: int | None = None) -> None:
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)

    def select(self, t: int, rng: np.random.Generator) -> int:
        unpulled = np.flatnonzero(self.counts == 0)
        if len(unpulled):
            return int(unpulled[0])
        scores = self.sums / self.counts + np.sqrt(self.bonus / self.counts)
        return int(np.argmax(scores))

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward


class ThompsonPolicy:
    """Independent Beta-Bernoulli posteriors, initialized at Beta(1, 1)."""

    def __init__(self, alpha0: float = 1.0, beta0: float = 1.0) -> None:
        self.alpha0 = alpha0
        self.beta0 = beta0

    def reset(self, num_arms: int, horizon: int | None = None) -> None:
        self.alpha = np.full(num_arms, self.alpha0)
        self.beta = np.full(num_arms, self.beta0)
        self.counts = np.zeros(num_arms)

    def select(self, t: int, rng: np.random.Generator) -> int:
        return int(np.argmax(rng.beta(self.alpha, self.beta)))

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        if reward:
            self.alpha[arm] += 1
        else:
            self.beta[arm] += 1


class GreedyPolicy:
    """Pure argmax of empirical means after one initial pull of every arm."""

    def reset(self, num_arms: int, horizon: int | None = None) -> None:
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)

    def select(self, t: int, rng: np.random.Generator) -> int:
        unpulled = np.flatnonzero(self.counts == 0)
        if len(unpulled):
            return int(unpulled[0])
        return int(np.argmax(self.sums / self.counts))

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward


class EpsilonGreedyPolicy:
    """Random arm with probability epsilon, else argmax of empirical means.

    No initialization sweep: unpulled arms count as mean 0 and exploration is
    left entirely to the epsilon draws. Epsilon decays multiplicatively after
    every update.
    """

    def __init__(self, epsilon0: float = 0.1, decay: float = 0.99) -> None:
        self.epsilon0 = epsilon0
        self.decay = decay

    def reset(self, num_arms: int, horizon: int | None = None) -> None:
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)
        self.epsilon = self.epsilon0

    def select(self, t: int, rng: np.random.Generator) -> int:
        if rng.random() < self.epsilon:
            return int(rng.integers(len(self.counts)))
        means = np.divide(
            self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0
        )
        return int(np.argmax(means))

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.epsilon *= self.decay


class ScheduledSoftmaxAgent:
    """Samples arms from a softmax over running empirical means whose sharpness
    follows a lambda schedule: early steps are near uniform, late steps
    concentrate on the best-looking arm."""

    def __init__(self, schedule: LambdaSchedule) -> None:
        self.schedule = schedule

    def reset(self, num_arms: int, horizon: int | None = None) -> None:
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)

    def select(self, t: int, rng: np.random.Generator) -> int:
        means = np.divide(
            self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0
        )
        lam = lambda_exp(self.schedule, min(t, self.schedule.horizon))
        dist = lambda_probabilities(means, lam)
        return sample_categorical(dist, rng)

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward


class TemperaturePolicyAgent:
    """Language-model arm chooser prompted with the summarized history.

    ``temperature`` is a constant or a callable of the step index (for the
    decaying schedule). Replies must match the strict answer envelope;
    anything else, including backend failures after retries, is an invalid
    step. Invalid steps never enter the summarized history statistics.
    """

    def __init__(self, backend: PolicyBackend, temperature: float | Callable[[int], float] = 0.0):
        self.backend = backend
        self.temperature = temperature

    def reset(self, num_arms: int, horizon: int) -> None:
        if num_arms > len(ARM_COLORS):
            raise ValueError(f"color interface supports at most {len(ARM_COLORS)} arms")
        self.num_arms = num_arms
        self.horizon = horizon
        self.counts = np.zeros(num_arms)
        self.sums = np.zeros(num_arms)
        self.steps_taken = 0
        self._system = prompts.mab_system(num_arms, horizon)

    def _tau(self, t: int) -> float:
        if callable(self.temperature):
            return float(self.temperature(t))
        return float(self.temperature)

    def select(self, t: int, rng: np.random.Generator) -> int | None:
        means = np.divide(
            self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0
        )
        observation = prompts.mab_history(
            self.steps_taken, self.counts, means, ARM_COLORS[: self.num_arms]
        )
        context = (
            {"role": "system", "content": self._system},
            {"role": "user", "content": observation},
        )
        self.steps_taken += 1
        try:
            reply = self.backend.complete(
                PolicyRequest(context, self._tau(t), 1, PromptKind.MAB_ANSWER)
            )
        except BackendError:
            return None
        arm = parse_answer_envelope(reply.text)
        if arm is not None and arm >= self.num_arms:
            return None
        return arm

    def update(self, arm: int, reward: int) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward


def decaying_temperature(
    horizon: int, tau_max: float = 2.0, k: float = 5.0
) -> Callable[[int], float]:
    """Exponentially decaying temperature from tau_max at t=0 to 0 at t=horizon."""
    schedule = LambdaSchedule(0.0, tau_max, k, horizon)
    return lambda t: tau_max - lambda_exp(schedule, min(max(t, 0), horizon))


# --- running -------------------------------------------------------------------


def run_bandit(agent, instance: BanditInstance, seed: int) -> BanditRun:
    """Play one horizon; rewards draw Bernoulli(mean) from the run's stream.

    ``agent.select`` may return None (or an out-of-range arm) to mark an
    invalid step: no reward is drawn, no update happens, and the gap penalty
    is applied by the metrics.
    """
    rng = np.random.default_rng([seed, 1])
    agent.reset(instance.num_arms, instance.horizon)
    pulls: list[int] = []
    rewards: list[int] = []
    for t in range(instance.horizon):
        arm = agent.select(t, rng)
        if arm is None or not (0 <= arm < instance.num_arms):
            pulls.append(INVALID_PULL)
            rewards.append(0)
            continue
        reward = 1 if rng.random() < instance.arm_means[arm] else 0
        pulls.append(arm)
        rewards.append(reward)
        agent.update(arm, reward)
    return BanditRun(pulls, rewards, seed)


# --- text-environment adapter ----------------------------------------------------


class BanditEnv:
    """The bandit behind the text-env interface.

    Observations are the summarized-history prompt; actions are parsed with
    :func:`arm_from_action`. Unparseable actions are invalid steps: no
    reward, no history update, but the step still counts against the
    horizon. The reward stream matches :func:`run_bandit` for the same seed.
    """

    def __init__(self, instance: BanditInstance, seed: int) -> None:
        self.instance = instance
        self.seed = seed
        self._started = False

    def reset(self, seed: int | None = None) -> str:
        if seed is not None:
            self.seed = seed
        self._rng = np.random.default_rng([self.seed, 1])
        self._started = True
        self.t = 0
        self.pulls: list[int] = []
        self.rewards: list[int] = []
        self.counts = np.zeros(self.instance.num_arms)
        self.sums = np.zeros(self.instance.num_arms)
        return self._observation()

    def _observation(self) -> str:
        means = np.divide(
            self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0
        )
        return prompts.mab_history(
            self.t, self.counts, means, ARM_COLORS[: self.instance.num_arms]
        )

    def step(self, action_text: str):
        from .textenv import EnvError, TextEnvStep

        if not self._started:
            raise EnvError("reset() must be called before step()")
        if self.t >= self.instance.horizon:
            raise EnvError("bandit horizon exhausted; reset() to start a new run")
        arm = arm_from_action(action_text)
        if arm is not None and not (0 <= arm < self.instance.num_arms):
            arm = None
        if arm is None:
            reward = 0
            self.pulls.append(INVALID_PULL)
        else:
            reward = 1 if self._rng.random() < self.instance.arm_means[arm] else 0
            self.pulls.append(arm)
            self.counts[arm] += 1
            self.sums[arm] += reward
        self.rewards.append(reward)
        self.t += 1
        return TextEnvStep(
            observation=self._observation(),
            reward=float(reward),
            score=sum(self.rewards) / self.instance.horizon,
            terminal=self.t >= self.instance.horizon,
            valid_action=arm is not None,
        )

    def to_run(self) -> BanditRun:
        return BanditRun(list(self.pulls), list(self.rewards), self.seed)


def make_mab_context_builder(instance: BanditInstance) -> Callable:
    """Context builder for bandit episodes: system prompt plus the summary
    observation (the observation already carries the whole history)."""
    system = prompts.mab_system(instance.num_arms, instance.horizon)

    def build(history: Sequence[HistoryTriple], observation: str, params: DoraParams):
        return [
            {"role": "system", "content": system},
            {"role": "user", "content": observation},
        ]

    return build


def mab_dora_params(**overrides) -> DoraParams:
    """Defaults for explore/greedy agents on the bandit: greedy replies use the
    answer envelope and an unparseable step maps to an invalid action."""
    base = dict(greedy_kind=PromptKind.MAB_ANSWER, invalid_action="")
    base.update(overrides)
    return DoraParams(**base)
