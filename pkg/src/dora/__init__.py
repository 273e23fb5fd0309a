"""Training-free exploration control for language-model agents.

The pipeline: decide greedy vs. explore, generate candidate actions, score
them from token log-probabilities, and sample from a softmax whose sharpness
is set by an exploration parameter lambda (scheduled or policy-chosen).
Ships with a reproducible Bernoulli-bandit lab and a deterministic toy text
world for exercising every component without a live model.
"""

from .agent import (
    DoraParams,
    EpisodeLog,
    FallbackReason,
    ScoredCandidate,
    StepRecord,
    UsedActionRegistry,
    build_text_context,
    dora_step,
    run_episode,
)
from .bandit import (
    ARM_COLORS,
    INVALID_PULL,
    BanditEnv,
    BanditInstance,
    BanditMetrics,
    BanditRun,
    EpsilonGreedyPolicy,
    GreedyPolicy,
    ScheduledSoftmaxAgent,
    TemperaturePolicyAgent,
    ThompsonPolicy,
    UcbPolicy,
    arm_from_action,
    compute_metrics,
    decaying_temperature,
    make_hard_instance,
    make_mab_context_builder,
    mab_dora_params,
    parse_answer_envelope,
    press_action,
    run_bandit,
)
from .lambda_control import (
    DEFAULT_LAMBDA_BOUNDS,
    LambdaSchedule,
    LambdaSource,
    PolicySampledLambda,
    ScheduledLambda,
    extract_lambda,
    lambda_exp,
    parse_lambda_reply,
)
from .policy import (
    BackendError,
    MockPolicy,
    MockScriptError,
    Mode,
    PolicyBackend,
    PolicyReply,
    PolicyRequest,
    PromptKind,
    RemotePolicy,
    ScriptEntry,
    ScriptExhaustedError,
    decide_mode,
    generate_candidates,
    greedy_action,
    normalize_action,
)
from .scoring import (
    CandidateAction,
    LambdaDistribution,
    ScoreParams,
    lambda_probabilities,
    mean_logprob,
    minmax_normalize,
    sample_categorical,
    score_candidates,
    variance_logprob,
)
from .textenv import (
    EnvError,
    KeyMazeWorld,
    LoopStats,
    TextEnvStep,
    default_world_definition,
    loop_stats,
    unique_states,
)

__version__ = "0.1.0"
