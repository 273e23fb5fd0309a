#!/usr/bin/env python3
"""Explore-to-exploit transition on the bandit, driven by the lambda schedule.

A softmax-over-running-means agent plays one episode of the hard instance
while lambda ramps from 0 to 40. Early steps spread pulls across all arms;
late steps concentrate on the best one. Prints the cumulative selection
count per arm at checkpoints, the data behind an arm-selection-over-time
plot.
"""

import numpy as np

from dora import (
    ARM_COLORS,
    LambdaSchedule,
    ScheduledSoftmaxAgent,
    compute_metrics,
    make_hard_instance,
    run_bandit,
)

SEED = 0
instance = make_hard_instance(5, 0.2, 200, seed=SEED)
agent = ScheduledSoftmaxAgent(LambdaSchedule(0.0, 40.0, k=5.0, horizon=200))
run = run_bandit(agent, instance, SEED)

print(f"best arm this episode: {ARM_COLORS[instance.best_arm]} (mean 0.6, others 0.4)\n")
header = "".join(f"{c:>8}" for c in ARM_COLORS)
print(f"{'t':>4}{header}")

counts = np.zeros(5, dtype=int)
checkpoints = {25, 50, 75, 100, 125, 150, 175, 200}
for t, arm in enumerate(run.pulls, start=1):
    counts[arm] += 1
    if t in checkpoints:
        cells = "".join(f"{c:>8}" for c in counts)
        print(f"{t:>4}{cells}")

metrics = compute_metrics(run, instance)
quarter = len(run.pulls) // 4
first = sum(1 for a in run.pulls[:quarter] if a == instance.best_arm) / quarter
last = sum(1 for a in run.pulls[-quarter:] if a == instance.best_arm) / quarter
print(f"\nbest-arm share: first quartile {first:.2f} -> last quartile {last:.2f}")
print(f"cumulative regret {metrics.cumulative_regret:.1f}, suffix failure: {metrics.suffix_failure}")
