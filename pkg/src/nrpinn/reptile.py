"""First-order meta-learning of network initializations.

Each sampled task is adapted for k optimizer steps from the current master
parameters; the master then moves a scheduled fraction epsilon toward the
adapted copy. Tasks are either labeled solution samples (supervised
regime), governing equations with boundary/initial conditions
(unsupervised), or a mix (semi-supervised).
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import network, tasks, training
from . import autodiff as ad
from .errors import ConfigurationError, NumericError


@dataclass(frozen=True)
class MetaConfig:
    """Shape of one meta-training run.

    ``n_sweeps`` (N) outer passes each visit ``tasks_per_sweep`` (L) tasks:
    the first ``supervised_per_sweep`` (L_z) come from the labeled pool, the
    rest from the governing-equation pool. The outer step decays linearly
    over sweeps: epsilon = epsilon0 * (1 - sweep / N).
    """

    n_sweeps: int
    tasks_per_sweep: int
    supervised_per_sweep: int
    inner_steps: int
    inner_optimizer: str = "adam"
    inner_learning_rate: float = 1e-3
    epsilon0: float = 1.0
    zero_order: tasks.TaskDistribution | None = None
    high_order: tasks.TaskDistribution | None = None
    budget_zero: tasks.TaskBudget = field(default_factory=tasks.TaskBudget)
    budget_high: tasks.TaskBudget = field(default_factory=tasks.TaskBudget)
    weights: training.LossWeights = field(default_factory=training.LossWeights)
    master_seed: int = 0

    def __post_init__(self):
        if self.n_sweeps < 1:
            raise ConfigurationError("n_sweeps must be at least 1")
        if not 0 <= self.supervised_per_sweep <= self.tasks_per_sweep:
            raise ConfigurationError("need 0 <= supervised_per_sweep <= tasks_per_sweep")
        if self.tasks_per_sweep < 1:
            raise ConfigurationError("tasks_per_sweep must be at least 1")
        if self.inner_steps < 1:
            raise ConfigurationError("inner_steps must be at least 1")
        if self.epsilon0 < 0:
            raise ConfigurationError("epsilon0 must be nonnegative")
        if self.supervised_per_sweep > 0 and self.zero_order is None:
            raise ConfigurationError("supervised tasks need a zero_order distribution")
        if self.supervised_per_sweep < self.tasks_per_sweep and self.high_order is None:
            raise ConfigurationError("unsupervised tasks need a high_order distribution")


@dataclass
class OuterRow:
    sweep: int
    task_index: int
    kind: str            # "supervised" | "unsupervised"
    epsilon: float
    loss_start: float
    loss_end: float
    skipped: bool = False


@dataclass
class MetaCheckpoint:
    params: network.ParamVector
    spec: network.MlpSpec
    config_digest: str
    outer_rows: list[OuterRow] = field(default_factory=list)


def epsilon_schedule(epsilon0: float, sweep: int, n_sweeps: int) -> float:
    """Linearly decaying outer step: epsilon0 * (1 - sweep / n_sweeps)."""
    if not 0 <= sweep < n_sweeps:
        raise ConfigurationError(f"sweep {sweep} outside [0, {n_sweeps})")
    return epsilon0 * (1.0 - sweep / n_sweeps)


def reptile_outer_update(theta: network.ParamVector, theta_adapted: network.ParamVector,
                         epsilon: float) -> network.ParamVector:
    """Move the master parameters a fraction epsilon toward the adapted copy."""
    if theta.flat.size != theta_adapted.flat.size:
        raise ConfigurationError("parameter vectors differ in length")
    if not 0.0 <= epsilon <= 1.0:
        warnings.warn(f"outer step {epsilon:.4g} outside [0, 1]")
    flat = theta.flat + epsilon * (theta_adapted.flat - theta.flat)
    return theta.with_flat(flat)


def _task_pointsets(task: tasks.Task) -> tuple[object, dict]:
    if isinstance(task, tasks.LabeledTask):
        return None, {"data": task.data}
    sets = {"interior": task.interior, "boundary": task.boundary}
    if task.initial is not None:
        sets["initial"] = task.initial
    return task.instance, sets


def inner_adapt(spec: network.MlpSpec, task: tasks.Task, theta: network.ParamVector,
                k: int, optimizer: str, learning_rate: float,
                weights: training.LossWeights = training.LossWeights(),
                ) -> tuple[network.ParamVector, float, float]:
    """Adapt a copy of theta for k steps on the task's own loss.

    Labeled tasks minimize the data misfit alone; equation tasks minimize
    residual plus boundary (and initial-slice) misfits. Optimizer state is
    fresh for every task. Returns (adapted params, first loss, last loss).
    """
    instance, sets = _task_pointsets(task)
    params = theta.copy()
    opt = training.make_optimizer(optimizer, learning_rate, params.flat.size)
    first = last = np.nan
    for i in range(k):
        tape = ad.GradTape(params)
        breakdown = training.compute_loss(spec, instance, tape, sets, weights)
        last = breakdown.total
        if i == 0:
            first = last
        grads = tape.gradient(breakdown.total_var)
        params, opt = training.step(opt, params, grads)
    return params, first, last


def config_digest(config: MetaConfig, spec: network.MlpSpec) -> str:
    blob = json.dumps({"config": repr(config), "spec": repr(spec)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def meta_init(spec: network.MlpSpec, init_params: network.ParamVector,
              config: MetaConfig) -> MetaCheckpoint:
    """Run the full meta-initialization and return the trained checkpoint.

    Every sweep visits the supervised tasks first, then the unsupervised
    remainder; the outer update is applied after each task with the sweep's
    epsilon. Tasks that fail numerically are skipped (and logged); a sweep
    in which all tasks fail aborts the run.
    """
    theta = init_params.copy()
    rows: list[OuterRow] = []
    for sweep in range(config.n_sweeps):
        eps = epsilon_schedule(config.epsilon0, sweep, config.n_sweeps)
        adapted_any = False
        for j in range(config.tasks_per_sweep):
            supervised = j < config.supervised_per_sweep
            dist = config.zero_order if supervised else config.high_order
            budget = config.budget_zero if supervised else config.budget_high
            seed = np.random.SeedSequence([config.master_seed, sweep, j])
            task = tasks.sample_task(dist, budget, seed)
            kind = "supervised" if supervised else "unsupervised"
            try:
                adapted, first, last = inner_adapt(
                    spec, task, theta, config.inner_steps, config.inner_optimizer,
                    config.inner_learning_rate, config.weights)
            except NumericError as exc:
                warnings.warn(f"sweep {sweep} task {j} skipped: {exc}")
                rows.append(OuterRow(sweep, j, kind, eps, np.nan, np.nan, True))
                continue
            theta = reptile_outer_update(theta, adapted, eps)
            rows.append(OuterRow(sweep, j, kind, eps, first, last))
            adapted_any = True
        if not adapted_any:
            raise NumericError(f"every task in sweep {sweep} failed")
    return MetaCheckpoint(theta, spec, config_digest(config, spec), rows)


def save_meta_checkpoint(path, checkpoint: MetaCheckpoint) -> None:
    """Write the network-format checkpoint plus its provenance sidecars."""
    path = str(path)
    network.save_checkpoint(path, checkpoint.spec, checkpoint.params)
    with open(path + ".provenance.json", "w") as fh:
        json.dump({"config_digest": checkpoint.config_digest,
                   "outer_loss_csv": path + ".outer.csv"}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(path + ".outer.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep", "task_index", "kind", "epsilon",
                         "loss_start", "loss_end", "skipped"])
        for r in checkpoint.outer_rows:
            writer.writerow([r.sweep, r.task_index, r.kind, training.fmt(r.epsilon),
                             training.fmt(r.loss_start), training.fmt(r.loss_end),
                             int(r.skipped)])
