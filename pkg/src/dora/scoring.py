"""Sequence scoring and lambda-softmax action distributions.

Turns the per-token log-probabilities of candidate actions into bounded
scalar scores (likelihood traded off against token-level consistency) and
converts a score vector into a categorical sampling distribution whose
sharpness is controlled by the exploration parameter lambda: lambda = 0
samples uniformly, large lambda concentrates on the best-scored candidate.

Everything here is a pure function of its inputs; sampling takes an
explicit seeded generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 1e-8
PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class CandidateAction:
    """One proposed action string plus the log-probability of each of its tokens.

    ``token_logprobs`` must be non-empty, finite, and <= 0 (natural-log
    probabilities under the generating policy).
    """

    text: str
    token_logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        lps = tuple(float(x) for x in self.token_logprobs)
        object.__setattr__(self, "token_logprobs", lps)
        if len(lps) == 0:
            raise ValueError("candidate action needs at least one token log-probability")
        for lp in lps:
            if not math.isfinite(lp) or lp > 0.0:
                raise ValueError(f"token log-probabilities must be finite and <= 0, got {lp!r}")


@dataclass(frozen=True)
class ScoreParams:
    """Scoring weight alpha in [0, 1] and the min-max normalization guard epsilon > 0.

    alpha weighs the normalized mean log-probability; (1 - alpha) weighs the
    (negated) normalized variance.
    """

    alpha: float = 0.8
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if not (self.epsilon > 0.0) or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be a positive finite real, got {self.epsilon!r}")


@dataclass
class LambdaDistribution:
    """Scores, the lambda used, and the resulting categorical probabilities."""

    scores: np.ndarray
    lam: float
    probs: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=float)
        self.probs = np.asarray(self.probs, dtype=float)
        if self.scores.shape != self.probs.shape or self.scores.ndim != 1 or len(self.scores) < 1:
            raise ValueError("scores and probs must be 1-d vectors of equal length >= 1")
        if np.any(self.probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(float(self.probs.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities must sum to 1 within {PROB_SUM_TOL}")


def mean_logprob(candidate: CandidateAction) -> float:
    """Arithmetic mean of the candidate's token log-probabilities."""
    lps = candidate.token_logprobs
    return sum(lps) / len(lps)


def variance_logprob(candidate: CandidateAction) -> float:
    """Population variance (divide by N, no Bessel correction) of the token log-probabilities."""
    lps = candidate.token_logprobs
    mu = sum(lps) / len(lps)
    return sum((lp - mu) ** 2 for lp in lps) / len(lps)


def minmax_normalize(values, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Map values to [0, 1) via (x - min) / (max - min + epsilon).

    The epsilon guard keeps an all-equal vector well defined: it collapses
    to all zeros.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("values must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("values must be finite")
    if not (epsilon > 0.0):
        raise ValueError(f"epsilon must be > 0, got {epsilon!r}")
    lo = float(arr.min())
    hi = float(arr.max())
    return (arr - lo) / (hi - lo + epsilon)


def score_candidates(candidates, params: ScoreParams | None = None) -> np.ndarray:
    """Score each candidate as alpha * norm_mean - (1 - alpha) * norm_variance.

    Means and variances are min-max normalized across the given candidate
    set, so scores are only comparable within one call. Output order matches
    input order; every score lies in [-(1 - alpha), alpha]. A singleton set
    scores exactly 0.
    """
    params = params or ScoreParams()
    cands = list(candidates)
    if not cands:
        raise ValueError("candidate set must be non-empty")
    means = np.array([mean_logprob(c) for c in cands])
    variances = np.array([variance_logprob(c) for c in cands])
    norm_means = minmax_normalize(means, params.epsilon)
    norm_vars = minmax_normalize(variances, params.epsilon)
    return params.alpha * norm_means - (1.0 - params.alpha) * norm_vars


def lambda_probabilities(scores, lam: float) -> LambdaDistribution:
    """Softmax of lambda * scores, computed with max-logit subtraction.

    lambda = 0 yields the exact uniform distribution; lambda must be >= 0
    (negative, anti-greedy sharpening is rejected).
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("scores must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise ValueError(f"lambda must be a finite real >= 0, got {lam!r}")
    logits = lam * arr
    shifted = logits - logits.max()
    weights = np.exp(shifted)
    probs = weights / weights.sum()
    return LambdaDistribution(scores=arr, lam=lam, probs=probs)


def sample_categorical(dist: LambdaDistribution, rng: np.random.Generator) -> int:
    """Draw an index by inverse-CDF over the cumulative probabilities."""
    cdf = np.cumsum(dist.probs)
    u = rng.random()
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, len(cdf) - 1)
