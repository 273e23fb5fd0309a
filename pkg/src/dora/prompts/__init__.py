"""Prompt templates, shipped as plain-text assets and rendered by substitution.

Templates use ``{name}`` placeholders filled with :func:`str.replace` rather
than ``str.format`` so that literal braces in the template bodies (JSON
shapes, color lists) survive untouched.
"""

from __future__ import annotations

from importlib import resources

ASSET_NAMES = (
    "mab_system",
    "mab_history",
    "zero_shot",
    "zero_shot_cot",
    "tree_of_thought",
    "react",
    "prompt_explore",
    "mode_decision",
    "candidate_generation",
    "lambda_decision",
)

_cache: dict[str, str] = {}


def load(name: str) -> str:
    """Return the raw text of a prompt asset by name (without the .txt suffix)."""
    if name not in _cache:
        if name not in ASSET_NAMES:
            raise KeyError(f"unknown prompt asset {name!r}")
        _cache[name] = (
            resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
        )
    return _cache[name]


def _fill(template: str, mapping: dict[str, object]) -> str:
    out = template
    for key, value in mapping.items():
        out = out.replace("{" + key + "}", str(value))
    return out


def mab_system(num_arms: int, horizon: int) -> str:
    return _fill(load("mab_system"), {"K": num_arms, "T": horizon})


def mab_history(step_count: int, counts, avg_rewards, colors) -> str:
    """Summarized per-button history: counts always, averages only once pressed."""
    lines = []
    for color, n, avg in zip(colors, counts, avg_rewards):
        label = color.capitalize()
        if n > 0:
            lines.append(f"- {label} button: pressed {int(n)} times, average reward {avg:.2f}")
        else:
            lines.append(f"- {label} button: pressed 0 times")
    return _fill(load("mab_history"), {"t": step_count, "summary": "\n".join(lines)})


def mode_decision() -> str:
    return load("mode_decision")


def candidate_generation(n_candidates: int) -> str:
    return _fill(load("candidate_generation"), {"n": n_candidates})


def lambda_decision(lambda_min: float, lambda_max: float) -> str:
    return _fill(
        load("lambda_decision"), {"lambda_min": f"{lambda_min:g}", "lambda_max": f"{lambda_max:g}"}
    )


def zero_shot() -> str:
    return load("zero_shot")
