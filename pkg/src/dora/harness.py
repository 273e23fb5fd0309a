"""Batch experiment runner: configuration, persistence, and reporting.

A suite is N seeded runs of one agent on one environment. Every run writes a
self-describing JSONL file (a config line, one line per step, one metrics
line, all carrying ``schema_version``); a single aggregation pass then
produces the summary CSV and plot-data CSVs. Run i uses seed
``master_seed + i``, and mock/classical batches are byte-for-byte
reproducible from (config, master_seed).
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .agent import DoraParams, EpisodeLog, run_episode
from .bandit import (
    ARM_COLORS,
    INVALID_PULL,
    BanditEnv,
    BanditInstance,
    BanditRun,
    EpsilonGreedyPolicy,
    GreedyPolicy,
    TemperaturePolicyAgent,
    ThompsonPolicy,
    UcbPolicy,
    compute_metrics,
    decaying_temperature,
    make_hard_instance,
    make_mab_context_builder,
    mab_dora_params,
    run_bandit,
)
from .lambda_control import LambdaSchedule, PolicySampledLambda, ScheduledLambda
from .policy import BackendError, MockPolicy, PolicyRequest, PromptKind, RemotePolicy, normalize_action
from .textenv import KeyMazeWorld, loop_stats

SCHEMA_VERSION = 1

SUITES = ("bandit", "keymaze")
AGENTS = ("ucb", "ts", "greedy", "eps_greedy", "llm_temp", "dora_scheduled", "dora_auto")
CLASSICAL_AGENTS = ("ucb", "ts", "greedy", "eps_greedy")
BACKEND_AGENTS = ("llm_temp", "dora_scheduled", "dora_auto")


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


class ReportError(Exception):
    """Run artifacts missing or unreadable."""


class SchemaVersionError(ReportError):
    """Artifact written under a different schema version."""


@dataclass
class ExperimentConfig:
    suite: str = "bandit"
    agent: str = "ucb"
    runs: int = 20
    master_seed: int = 0
    output_dir: str = "runs"
    backend: str | None = None
    workers: int | None = None
    # bandit instance
    num_arms: int = 5
    gap: float = 0.2
    horizon: int = 200
    # explore/greedy agent
    n_candidates: int = 20
    alpha: float = 0.8
    tau_decision: float = 0.2
    tau_candidates: float = 0.7
    tau_lambda: float = 0.2
    lambda_min: float = 0.0
    lambda_max: float = 40.0
    growth_k: float = 5.0
    # temperature baseline: a number, or "decay" for the decaying schedule
    temperature: float | str = 0.0
    # keymaze
    world: str | None = None
    max_steps: int | None = None

    @classmethod
    def from_dict(cls, data: dict, overrides: dict | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(data)
        for key, value in (overrides or {}).items():
            if value is not None:
                if key not in known:
                    raise ConfigError(f"unknown config override: {key}")
                merged[key] = value
        config = cls(**merged)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fp:
                data = json.load(fp)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(data, overrides)

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if self.agent not in AGENTS:
            raise ConfigError(f"unknown agent {self.agent!r}; expected one of {AGENTS}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.suite == "keymaze" and self.agent in CLASSICAL_AGENTS:
            raise ConfigError(f"agent {self.agent!r} only runs on the bandit suite")
        if self.agent in BACKEND_AGENTS and not self.backend:
            raise ConfigError(f"agent {self.agent!r} needs --backend mock:<script.json> or remote")
        if self.backend and self.backend != "remote" and not self.backend.startswith("mock:"):
            raise ConfigError(f"backend must be 'remote' or 'mock:<script.json>', got {self.backend!r}")
        if self.backend and self.backend.startswith("mock:"):
            script = self.backend.split(":", 1)[1]
            if not Path(script).is_file():
                raise ConfigError(f"mock script not found: {script}")
        if self.world is not None and not Path(self.world).is_file():
            raise ConfigError(f"world file not found: {self.world}")

    def backend_factory(self):
        """Fresh backend per run (the mock is single-episode by contract)."""
        if self.backend is None:
            return None
        if self.backend == "remote":
            try:
                RemotePolicy()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            return lambda: RemotePolicy()
        script = self.backend.split(":", 1)[1]
        return lambda: MockPolicy.from_file(script)

    def dora_params(self, greedy_kind: PromptKind) -> DoraParams:
        return DoraParams(
            n_candidates=self.n_candidates,
            alpha=self.alpha,
            tau_decision=self.tau_decision,
            tau_candidates=self.tau_candidates,
            tau_lambda=self.tau_lambda,
            greedy_kind=greedy_kind,
        )

    def lambda_source(self, horizon: int):
        if self.agent == "dora_auto":
            return PolicySampledLambda((self.lambda_min, self.lambda_max))
        return ScheduledLambda(
            LambdaSchedule(self.lambda_min, self.lambda_max, self.growth_k, horizon)
        )


@dataclass
class RunArtifacts:
    output_dir: Path
    run_files: list[Path]
    metrics: list[dict]
    aggregate_csv: Path | None
    plot_csvs: list[Path]
    failures: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


def fmt(value) -> str:
    """CSV cell: 6 significant digits for floats, plain text otherwise."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _step_line_from_record(record, run_index: int) -> dict:
    line = {
        "schema_version": SCHEMA_VERSION,
        "kind": "step",
        "run": run_index,
        "step": record.step,
        "mode": record.mode.value,
        "chosen_action": record.chosen_action,
        "fallback": record.fallback_reason.value if record.fallback_reason else None,
    }
    if record.lam is not None:
        line["lambda"] = record.lam
    if record.candidates is not None:
        line["candidates"] = [
            {"action": c.action, "score": c.score, "prob": c.prob} for c in record.candidates
        ]
    return line


# --- per-run execution ---------------------------------------------------------


def _classical_policy(agent: str):
    return {
        "ucb": UcbPolicy,
        "ts": ThompsonPolicy,
        "greedy": GreedyPolicy,
        "eps_greedy": EpsilonGreedyPolicy,
    }[agent]()


def _bandit_lines(run: BanditRun, instance: BanditInstance, run_index: int) -> list[dict]:
    lines = []
    for t, (arm, reward) in enumerate(zip(run.pulls, run.rewards)):
        lines.append(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "step",
                "run": run_index,
                "step": t,
                "arm": None if arm == INVALID_PULL else arm,
                "reward": reward,
                "valid": arm != INVALID_PULL,
            }
        )
    return lines


def _run_bandit_one(config: ExperimentConfig, backend_factory, run_index: int):
    seed = config.master_seed + run_index
    instance = make_hard_instance(config.num_arms, config.gap, config.horizon, seed)
    episode: EpisodeLog | None = None

    if config.agent in CLASSICAL_AGENTS:
        run = run_bandit(_classical_policy(config.agent), instance, seed)
    elif config.agent == "llm_temp":
        temperature = (
            decaying_temperature(config.horizon)
            if config.temperature == "decay"
            else float(config.temperature)
        )
        run = run_bandit(TemperaturePolicyAgent(backend_factory(), temperature), instance, seed)
    else:
        backend = backend_factory()
        env = BanditEnv(instance, seed)
        episode = run_episode(
            backend,
            env,
            config.lambda_source(config.horizon),
            mab_dora_params(
                n_candidates=config.n_candidates,
                alpha=config.alpha,
                tau_decision=config.tau_decision,
                tau_candidates=config.tau_candidates,
                tau_lambda=config.tau_lambda,
            ),
            max_steps=config.horizon,
            rng=np.random.default_rng([seed, 2]),
            context_builder=make_mab_context_builder(instance),
            seed=seed,
        )
        run = env.to_run()

    metrics = compute_metrics(run, instance)
    lines = [
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "config",
            "suite": "bandit",
            "agent": config.agent,
            "run": run_index,
            "seed": seed,
            "num_arms": instance.num_arms,
            "gap": instance.gap,
            "horizon": instance.horizon,
            "best_arm": instance.best_arm,
        }
    ]
    step_lines = _bandit_lines(run, instance, run_index)
    if episode is not None:
        for base, record in zip(step_lines, episode.steps):
            base.update(_step_line_from_record(record, run_index))
    lines += step_lines
    metrics_dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": "metrics",
        "suite": "bandit",
        "agent": config.agent,
        "run": run_index,
        "seed": seed,
        "best_arm": instance.best_arm,
        "mean_avg_reward": metrics.mean_avg_reward,
        "cum_regret": metrics.cumulative_regret,
        "best_arm_frac": metrics.best_arm_fraction,
        "suffix_failure": metrics.suffix_failure,
        "invalid_count": metrics.invalid_count,
        "pulls": run.pulls,
    }
    lines.append(metrics_dict)
    return lines, metrics_dict


def _run_keymaze_llm_temp(config: ExperimentConfig, backend, world, max_steps: int, seed: int):
    """Plain single-action prompting at a fixed or decaying temperature."""
    from . import prompts

    if config.temperature == "decay":
        tau = decaying_temperature(max_steps)
    else:
        fixed = float(config.temperature)
        tau = lambda t: fixed  # noqa: E731 - trivial closure
    observation = world.reset(seed)
    log = EpisodeLog(observations=[observation], seed=seed)
    history = []
    for t in range(max_steps):
        context = [{"role": "system", "content": prompts.zero_shot()}]
        for obs, act in history[-20:]:
            context.append({"role": "user", "content": obs})
            context.append({"role": "assistant", "content": act})
        context.append({"role": "user", "content": observation})
        reply = backend.complete(
            PolicyRequest(tuple(context), tau(t), 1, PromptKind.GREEDY_ACTION)
        )
        action = ""
        for line in reply.text.split("\n"):
            action = normalize_action(line)
            if action:
                break
        from .agent import Mode, StepRecord

        log.steps.append(StepRecord(t, observation, Mode.GREEDY, action))
        result = world.step(action)
        log.rewards.append(result.reward)
        log.observations.append(result.observation)
        log.score = result.score
        history.append((observation, action))
        observation = result.observation
        if result.terminal:
            log.terminal = True
            break
    log.truncated = not log.terminal
    log.token_count = backend.tokens_used
    return log


def _run_keymaze_one(config: ExperimentConfig, backend_factory, run_index: int):
    seed = config.master_seed + run_index
    world = (
        KeyMazeWorld.from_file(config.world) if config.world else KeyMazeWorld()
    )
    max_steps = config.max_steps or world.horizon
    backend = backend_factory()

    if config.agent == "llm_temp":
        episode = _run_keymaze_llm_temp(config, backend, world, max_steps, seed)
    else:
        episode = run_episode(
            backend,
            world,
            config.lambda_source(max_steps),
            config.dora_params(PromptKind.GREEDY_ACTION),
            max_steps=max_steps,
            rng=np.random.default_rng([seed, 2]),
            seed=seed,
        )

    stats = loop_stats(episode)
    lines = [
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "config",
            "suite": "keymaze",
            "agent": config.agent,
            "run": run_index,
            "seed": seed,
            "max_steps": max_steps,
        }
    ]
    for record, reward in zip(episode.steps, episode.rewards + [0.0] * len(episode.steps)):
        line = _step_line_from_record(record, run_index)
        line["observation"] = record.observation
        line["reward"] = reward
        lines.append(line)
    metrics_dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": "metrics",
        "suite": "keymaze",
        "agent": config.agent,
        "run": run_index,
        "seed": seed,
        "score": episode.score,
        "steps": episode.num_steps,
        "terminal": episode.terminal,
        "partial": episode.partial,
        "unique_states": stats.unique_states,
        "loops_encountered": stats.loops_encountered,
        "loops_recovered": stats.loops_recovered,
        "token_count": episode.token_count,
    }
    lines.append(metrics_dict)
    return lines, metrics_dict


# --- suite driver ---------------------------------------------------------------


def run_suite(config: ExperimentConfig) -> RunArtifacts:
    """Execute N runs in a bounded worker pool and write all artifacts.

    Per-run JSONL files are written by the workers; the aggregate CSV, the
    plot CSVs, and summary.json are written in a single pass afterwards, in
    run order, so repeated invocations with the same config and master seed
    produce identical bytes for mock and classical agents.
    """
    config.validate()
    backend_factory = config.backend_factory()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    runner = _run_bandit_one if config.suite == "bandit" else _run_keymaze_one

    def one(i: int):
        try:
            return i, runner(config, backend_factory, i), None
        except BackendError as exc:
            return i, None, {"run": i, "kind": "backend", "error": str(exc)}
        except Exception as exc:  # noqa: BLE001 - recorded per run, batch continues
            return i, None, {"run": i, "kind": type(exc).__name__, "error": str(exc)}

    workers = config.workers or os.cpu_count() or 1
    if workers == 1:
        results = [one(i) for i in range(config.runs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(config.runs)))
    results.sort(key=lambda item: item[0])

    run_files: list[Path] = []
    metrics: list[dict] = []
    failures: list[dict] = []
    for i, payload, failure in results:
        if failure is not None:
            failures.append(failure)
            continue
        lines, metrics_dict = payload
        path = out / f"{config.agent}_run{i:04d}.jsonl"
        path.write_text("\n".join(_dump_line(line) for line in lines) + "\n", encoding="utf-8")
        run_files.append(path)
        metrics.append(metrics_dict)

    aggregate_csv = None
    plot_csvs: list[Path] = []
    if metrics:
        if config.suite == "bandit":
            aggregate_csv = out / "aggregate.csv"
            _write_csv(aggregate_csv, *_bandit_aggregate_rows(config.agent, metrics))
            plot_csvs = _write_bandit_plots(out, config, metrics)
        else:
            aggregate_csv = out / "aggregate.csv"
            _write_csv(aggregate_csv, *_keymaze_aggregate_rows(config.agent, metrics))

    summary = {
        "schema_version": SCHEMA_VERSION,
        "suite": config.suite,
        "agent": config.agent,
        "runs": config.runs,
        "completed": len(metrics),
        "failures": failures,
        "master_seed": config.master_seed,
        "incomplete": bool(failures),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    return RunArtifacts(out, run_files, metrics, aggregate_csv, plot_csvs, failures)


def _bandit_aggregate_rows(agent: str, metrics: list[dict]):
    header = ["agent", "mean_avg_reward", "suffix_fail_freq", "best_arm_frac", "cum_regret", "invalid_count"]
    n = len(metrics)
    row = [
        agent,
        sum(m["mean_avg_reward"] for m in metrics) / n,
        sum(bool(m["suffix_failure"]) for m in metrics) / n,
        sum(m["best_arm_frac"] for m in metrics) / n,
        sum(m["cum_regret"] for m in metrics) / n,
        sum(m["invalid_count"] for m in metrics) / n,
    ]
    return header, [row]


KEYMAZE_HEADER = [
    "agent",
    "runs",
    "mean_score",
    "mean_steps",
    "mean_unique_states",
    "loops_encountered",
    "loops_recovered",
    "recovery_rate",
]


def _keymaze_aggregate_rows(agent: str, metrics: list[dict]):
    header = KEYMAZE_HEADER
    n = len(metrics)
    loops = sum(m["loops_encountered"] for m in metrics)
    recovered = sum(m["loops_recovered"] for m in metrics)
    row = [
        agent,
        n,
        sum(m["score"] for m in metrics) / n,
        sum(m["steps"] for m in metrics) / n,
        sum(m["unique_states"] for m in metrics) / n,
        loops,
        recovered,
        (recovered / loops) if loops else 0.0,
    ]
    return header, [row]


def _plot_series(metrics: list[dict], num_arms: int, horizon: int):
    """Mean cumulative selections per arm, invalid count, and best-arm share over t."""
    n = len(metrics)
    cum = np.zeros((horizon, num_arms))
    invalid = np.zeros(horizon)
    best_frac = np.zeros(horizon)
    for m in metrics:
        pulls = m["pulls"]
        best = m["best_arm"]
        counts = np.zeros(num_arms)
        bad = 0
        best_count = 0
        for t, arm in enumerate(pulls):
            if arm == INVALID_PULL or arm is None:
                bad += 1
            else:
                counts[arm] += 1
                if arm == best:
                    best_count += 1
            cum[t] += counts
            invalid[t] += bad
            best_frac[t] += best_count / (t + 1)
    return cum / n, invalid / n, best_frac / n


def _write_bandit_plots(out: Path, config: ExperimentConfig, metrics: list[dict]) -> list[Path]:
    num_arms = config.num_arms
    colors = list(ARM_COLORS[:num_arms]) + [f"arm{i}" for i in range(len(ARM_COLORS), num_arms)]
    cum, invalid, best_frac = _plot_series(metrics, num_arms, config.horizon)
    arm_path = out / "plot_arm_selection.csv"
    rows = [
        [t + 1, *cum[t], invalid[t]]
        for t in range(config.horizon)
    ]
    _write_csv(arm_path, ["t", *colors, "invalid"], rows)
    frac_path = out / "plot_best_arm_fraction.csv"
    _write_csv(
        frac_path,
        ["t", "best_arm_frac"],
        [[t + 1, best_frac[t]] for t in range(config.horizon)],
    )
    return [arm_path, frac_path]


# --- reporting -------------------------------------------------------------------


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fp:
        for line_no, line in enumerate(fp, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReportError(f"{path}:{line_no}: not valid JSON: {exc}") from exc
            version = record.get("schema_version")
            if version != SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"{path}:{line_no}: schema_version {version!r} != {SCHEMA_VERSION}"
                )
            records.append(record)
    return records


def report(input_dir, output_dir) -> list[Path]:
    """Aggregate a directory of run JSONL files into summary tables and plot CSVs.

    Raises :class:`ReportError` (before writing anything) when the directory
    holds no artifacts or any line fails the schema check.
    """
    input_dir = Path(input_dir)
    paths = sorted(input_dir.glob("**/*.jsonl"))
    if not paths:
        raise ReportError(f"no run artifacts (*.jsonl) found under {input_dir}")

    bandit_metrics: dict[str, list[dict]] = {}
    bandit_shape: dict[str, tuple[int, int]] = {}
    keymaze_metrics: dict[str, list[dict]] = {}
    for path in paths:
        records = _read_jsonl(path)
        header = next((r for r in records if r.get("kind") == "config"), None)
        metrics = next((r for r in records if r.get("kind") == "metrics"), None)
        if header is None or metrics is None:
            raise ReportError(f"{path}: missing config or metrics record")
        if header.get("suite") == "bandit":
            agent = header["agent"]
            bandit_metrics.setdefault(agent, []).append(metrics)
            bandit_shape[agent] = (header["num_arms"], header["horizon"])
        else:
            keymaze_metrics.setdefault(header["agent"], []).append(metrics)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if bandit_metrics:
        header = ["agent", "mean_avg_reward", "suffix_fail_freq", "best_arm_frac", "cum_regret", "invalid_count"]
        rows = []
        for agent in sorted(bandit_metrics):
            rows += _bandit_aggregate_rows(agent, bandit_metrics[agent])[1]
        table = out / "metric_table.csv"
        _write_csv(table, header, rows)
        written.append(table)
        for agent in sorted(bandit_metrics):
            num_arms, horizon = bandit_shape[agent]
            colors = list(ARM_COLORS[:num_arms])
            cum, invalid, best_frac = _plot_series(bandit_metrics[agent], num_arms, horizon)
            arm_path = out / f"arm_selection_{agent}.csv"
            _write_csv(
                arm_path,
                ["t", *colors, "invalid"],
                [[t + 1, *cum[t], invalid[t]] for t in range(horizon)],
            )
            frac_path = out / f"best_arm_fraction_{agent}.csv"
            _write_csv(
                frac_path,
                ["t", "best_arm_frac"],
                [[t + 1, best_frac[t]] for t in range(horizon)],
            )
            written += [arm_path, frac_path]

    if keymaze_metrics:
        header = KEYMAZE_HEADER
        rows = [
            _keymaze_aggregate_rows(agent, keymaze_metrics[agent])[1][0]
            for agent in sorted(keymaze_metrics)
        ]
        table = out / "loops_table.csv"
        _write_csv(table, header, rows)
        written.append(table)

    return written
