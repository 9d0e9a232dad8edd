"""Experiment harness: seeded training runs, metrics files, comparisons.

One experiment = one algorithm on one scenario over a list of seeds.
Every seed gets its own output directory containing

- ``metrics.csv``   one row per episode (fixed schema, per-cell visits),
- ``heatmap.csv``   per-cell visit counts over the plateau tail,
- ``summary.json``  scalar end-of-run aggregates,
- ``resolved_config.json``  the fully-resolved config for reproduction.

All floats are written with ``repr`` and all files with ``\\n`` line
endings, so identically-seeded single-threaded runs are byte-identical.
Partially-written seed directories are removed when a run fails.
"""

from __future__ import annotations

import csv
import json
import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .agents import (
    ActorCriticLearner,
    AgentConfig,
    MetaState,
    epsilon_at,
    make_learner,
    make_policy_params,
    meta_adapt,
    meta_outer_update,
    run_training_episode,
)
from .config import ExperimentConfig, resolved_dict, write_resolved
from .env import CoverageEnv, TaskSpec, task_with_swarm

PLOT_KINDS = ("heatmap", "learning_curve", "energy_bars", "satisfaction_bars")


@dataclass(frozen=True)
class EpisodeMetrics:
    """One metrics row; mirrors the metrics.csv schema."""

    episode: int
    swarm_size: int
    reward: float
    satisfaction: float
    energy_total_j: float
    energy_masked_j: float
    energy_strategic_j: float
    energy_nonstrategic_j: float
    collisions: int
    d_data_s: float
    d_com_s: float
    coverage_ok: bool
    visits: tuple[int, ...]

    @classmethod
    def from_stats(cls, episode: int, stats: dict) -> "EpisodeMetrics":
        return cls(
            episode=episode,
            swarm_size=int(stats["swarm_size"]),
            reward=float(stats["reward"]),
            satisfaction=float(stats["satisfaction"]),
            energy_total_j=float(stats["energy_total_j"]),
            energy_masked_j=float(stats["energy_masked_j"]),
            energy_strategic_j=float(stats["energy_strategic_j"]),
            energy_nonstrategic_j=float(stats["energy_nonstrategic_j"]),
            collisions=int(stats["collisions"]),
            d_data_s=float(stats["d_data_s"]),
            d_com_s=float(stats["d_com_s"]),
            coverage_ok=bool(stats["coverage_ok"]),
            visits=tuple(int(v) for v in stats["visits"]),
        )


_SCALAR_COLUMNS = (
    "episode", "swarm_size", "reward", "satisfaction",
    "energy_total_j", "energy_masked_j", "energy_strategic_j",
    "energy_nonstrategic_j", "collisions", "d_data_s", "d_com_s",
    "coverage_ok",
)


def _cell(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics(path: Path, rows: Sequence[EpisodeMetrics]) -> None:
    if not rows:
        raise ValueError("refusing to write an empty metrics file")
    n_cells = len(rows[0].visits)
    header = list(_SCALAR_COLUMNS) + [f"visits_{i}" for i in range(n_cells)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            scalars = [getattr(row, c) for c in _SCALAR_COLUMNS]
            writer.writerow([_cell(v) for v in scalars] + [str(v) for v in row.visits])


def read_metrics(path: Path) -> list[EpisodeMetrics]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            visits = tuple(
                int(rec[k]) for k in rec if k.startswith("visits_")
            )
            rows.append(EpisodeMetrics(
                episode=int(rec["episode"]),
                swarm_size=int(rec["swarm_size"]),
                reward=float(rec["reward"]),
                satisfaction=float(rec["satisfaction"]),
                energy_total_j=float(rec["energy_total_j"]),
                energy_masked_j=float(rec["energy_masked_j"]),
                energy_strategic_j=float(rec["energy_strategic_j"]),
                energy_nonstrategic_j=float(rec["energy_nonstrategic_j"]),
                collisions=int(rec["collisions"]),
                d_data_s=float(rec["d_data_s"]),
                d_com_s=float(rec["d_com_s"]),
                coverage_ok=rec["coverage_ok"] == "1",
                visits=visits,
            ))
    return rows


# --- convergence estimation --------------------------------------------------

def moving_average(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing moving average; shorter prefixes average what exists."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out = np.empty(len(values))
    acc = 0.0
    vals = list(values)
    for t, v in enumerate(vals):
        acc += v
        if t >= window:
            acc -= vals[t - window]
        out[t] = acc / min(t + 1, window)
    return out


def episodes_to_plateau(
    rewards: Sequence[float],
    window: int = 50,
    tail: float = 0.1,
    level: float = 0.9,
) -> tuple[int, float]:
    """First episode whose moving average reaches ``level`` of the plateau.

    The plateau is the mean of the moving-average curve over the last
    ``tail`` fraction of episodes; the threshold sits ``1 - level`` of
    the plateau's magnitude below it (so negative plateaus work too).
    Returns (episode index, plateau value).
    """
    if not 0.0 < tail <= 1.0 or not 0.0 < level <= 1.0:
        raise ValueError("tail and level must lie in (0, 1]")
    if not len(rewards):
        raise ValueError("need at least one episode")
    ma = moving_average(rewards, window)
    tail_len = max(1, math.ceil(tail * len(ma)))
    plateau = float(ma[-tail_len:].mean())
    threshold = plateau - (1.0 - level) * abs(plateau)
    hit = np.nonzero(ma >= threshold)[0]
    return int(hit[0]), plateau


# --- training drivers ---------------------------------------------------------

def train_task(
    env: CoverageEnv,
    task: TaskSpec,
    learner,
    episodes: int,
    rng: np.random.Generator,
    agent_cfg: AgentConfig,
    schedule_total: int | None = None,
    schedule_offset: int = 0,
    recorder: Callable[[dict], None] | None = None,
) -> list[dict]:
    """Train a learner on one fixed task for a number of episodes.

    Exploration: learners with an epsilon schedule anneal over
    ``schedule_total`` episodes (offset by ``schedule_offset``); the
    rest use the configured constant ``policy_epsilon``.
    """
    stats_list = []
    for i in range(episodes):
        if getattr(learner, "uses_schedule", False) and schedule_total:
            eps = epsilon_at(schedule_offset + i, schedule_total, agent_cfg)
        else:
            eps = agent_cfg.policy_epsilon
        stats = run_training_episode(env, task, learner, rng, eps)
        stats_list.append(stats)
        if recorder is not None:
            recorder(stats)
    return stats_list


def train_meta_params(
    env: CoverageEnv,
    agent_cfg: AgentConfig,
    episode_budget: int,
    rng: np.random.Generator,
    recorder: Callable[[dict], None] | None = None,
) -> MetaState:
    """Meta-train an initialization over the environment's task family.

    Each outer round adapts clones of the meta weights on freshly
    sampled tasks and interpolates the meta weights toward the mean
    adapted result. Rounds run until the episode budget cannot fund
    another full round; consumed episodes = rounds x tasks x inner.
    """
    meta = MetaState(
        make_policy_params(env.state_dim, env.cfg.max_swarm, agent_cfg, rng),
        inner_episodes=agent_cfg.meta_inner_episodes,
        inner_lr=agent_cfg.learning_rate,
        outer_lr=agent_cfg.meta_outer_lr,
    )
    per_round = agent_cfg.meta_tasks_per_update * agent_cfg.meta_inner_episodes
    for _ in range(episode_budget // per_round):
        adapted = []
        for _ in range(agent_cfg.meta_tasks_per_update):
            task = env.sample_task(rng)
            adapted.append(meta_adapt(meta, env, task, rng, agent_cfg, recorder))
        meta_outer_update(meta, adapted)
    return meta


def greedy_episode(
    env: CoverageEnv,
    task: TaskSpec,
    learner,
    rng_seed: int = 0,
    start_cells: Sequence[int] | None = None,
) -> dict:
    """One evaluation episode: greedy actions, no exploration, no learning."""
    state = env.reset(task, rng_seed=rng_seed, start_cells=start_cells)
    rng = np.random.default_rng(rng_seed)
    learner.begin_episode()
    old_mode = getattr(learner, "mode", None)
    if old_mode is not None:
        learner.mode = "greedy"
    try:
        while True:
            actions = learner.act(state, 0.0, rng)
            out = env.step(actions)
            state = out.state
            if out.done:
                break
    finally:
        if old_mode is not None:
            learner.mode = old_mode
    return env.episode_stats()


def _train_one_seed(cfg: ExperimentConfig, seed: int) -> list[EpisodeMetrics]:
    """Train one seed and return the recorded per-episode metrics rows.

    Rows cover the scenario-task episodes only; meta pre-training (for
    meta_rl) happens beforehand and is not recorded. Event episodes are
    indices into the recorded rows: an event at episode e changes the
    swarm before row e is played.
    """
    rng = np.random.default_rng(seed)
    env = CoverageEnv(cfg.mission, cfg.link, cfg.radio, cfg.env)
    episodes = cfg.run.episodes
    agent_cfg = cfg.agent
    algorithm = cfg.run.algorithm
    metrics: list[EpisodeMetrics] = []

    def record(stats: dict) -> None:
        metrics.append(EpisodeMetrics.from_stats(len(metrics), stats))

    meta: MetaState | None = None
    if algorithm == "meta_rl":
        budget = int(round(agent_cfg.meta_fraction * episodes))
        meta = train_meta_params(env, agent_cfg, budget, rng)
        learner = ActorCriticLearner(meta.params.clone(), agent_cfg)
    else:
        learner = make_learner(algorithm, env.state_dim, cfg.env.max_swarm, agent_cfg, rng)

    task = env.nominal_task()
    env.reset(task)  # leave no sampled pre-training task behind
    pending = sorted(cfg.events, key=lambda e: e.episode)
    while len(metrics) < episodes:
        while pending and pending[0].episode <= len(metrics):
            event = pending.pop(0)
            new_size = env.apply_swarm_event(event)
            task = task_with_swarm(task, new_size)
            if meta is not None:
                # A meta-initialized learner restarts adaptation from the
                # meta weights whenever the task changes.
                learner = ActorCriticLearner(meta.params.clone(), agent_cfg)
        next_stop = min(
            (e.episode for e in pending if e.episode > len(metrics)),
            default=episodes,
        )
        chunk = min(next_stop, episodes) - len(metrics)
        train_task(
            env, task, learner, chunk, rng, agent_cfg,
            schedule_total=episodes, schedule_offset=len(metrics),
            recorder=record,
        )
    return metrics


def _tail_slice(rows: Sequence, tail: float) -> Sequence:
    return rows[-max(1, math.ceil(tail * len(rows))):]


def _summary(cfg: ExperimentConfig, seed: int, metrics: list[EpisodeMetrics]) -> dict:
    run = cfg.run
    rewards = [m.reward for m in metrics]
    plateau_ep, plateau = episodes_to_plateau(
        rewards, run.ma_window, run.plateau_tail, run.convergence_level
    )
    tail = _tail_slice(metrics, run.plateau_tail)
    return {
        "scenario": run.scenario,
        "algorithm": run.algorithm,
        "seed": seed,
        "episodes": len(metrics),
        "pretrain_episodes": (
            int(round(cfg.agent.meta_fraction * run.episodes))
            if run.algorithm == "meta_rl" else 0
        ),
        "swarm_size_initial": metrics[0].swarm_size,
        "swarm_size_final": metrics[-1].swarm_size,
        "strategic_cells": list(cfg.env.strategic_cells),
        "cells_per_side": cfg.mission.cells_per_side,
        "ma_window": run.ma_window,
        "plateau_tail": run.plateau_tail,
        "convergence_level": run.convergence_level,
        "plateau_episode": plateau_ep,
        "plateau_reward": plateau,
        "reward_tail_mean": float(np.mean([m.reward for m in tail])),
        "satisfaction_tail_mean": float(np.mean([m.satisfaction for m in tail])),
        "energy_total_tail_mean": float(np.mean([m.energy_total_j for m in tail])),
        "energy_strategic_tail_mean": float(np.mean([m.energy_strategic_j for m in tail])),
        "energy_nonstrategic_tail_mean": float(np.mean([m.energy_nonstrategic_j for m in tail])),
        "collisions_total": int(sum(m.collisions for m in metrics)),
        "coverage_rate": float(np.mean([1.0 if m.coverage_ok else 0.0 for m in metrics])),
    }


def _write_heatmap(path: Path, cfg: ExperimentConfig, metrics: list[EpisodeMetrics]) -> None:
    tail = _tail_slice(metrics, cfg.run.plateau_tail)
    n_cells = len(metrics[0].visits)
    n_side = cfg.mission.cells_per_side
    counts = [sum(m.visits[i] for m in tail) for i in range(n_cells)]
    strategic = set(cfg.env.strategic_cells)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cell_x", "cell_y", "visits", "is_strategic"])
        for i in range(n_cells):
            writer.writerow([i % n_side, i // n_side, counts[i], int(i in strategic)])


def run_experiment(cfg: ExperimentConfig, base_dir: str | Path | None = None) -> list[Path]:
    """Train every seed of an experiment and write its output directories.

    Returns the per-seed directories. A failing seed removes its own
    partially-written directory before the error propagates.
    """
    base = Path(base_dir if base_dir is not None else cfg.run.out_dir)
    run_dir = base / f"{cfg.run.scenario}_{cfg.run.algorithm}"
    out_dirs = []
    for seed in cfg.run.seeds:
        seed_dir = run_dir / f"seed{seed}"
        if seed_dir.exists():
            shutil.rmtree(seed_dir)
        seed_dir.mkdir(parents=True)
        try:
            metrics = _train_one_seed(cfg, seed)
            write_metrics(seed_dir / "metrics.csv", metrics)
            _write_heatmap(seed_dir / "heatmap.csv", cfg, metrics)
            with open(seed_dir / "summary.json", "w", encoding="utf-8") as fh:
                json.dump(_summary(cfg, seed, metrics), fh, indent=2, sort_keys=True)
                fh.write("\n")
            write_resolved(cfg, seed_dir / "resolved_config.json")
        except BaseException:
            shutil.rmtree(seed_dir, ignore_errors=True)
            raise
        out_dirs.append(seed_dir)
    return out_dirs


# --- cross-algorithm comparison -----------------------------------------------

COMPARISON_COLUMNS = (
    "scenario", "algorithm", "seeds",
    "episodes_to_plateau_mean", "episodes_to_plateau_std",
    "final_satisfaction_mean", "final_satisfaction_std",
    "energy_strategic_mean", "energy_nonstrategic_mean",
    "plateau_reward_mean",
)


def compare_algorithms(
    cfgs: Sequence[ExperimentConfig], out_path: str | Path | None = None
) -> list[dict]:
    """Train several configs on one scenario and tabulate them side by side.

    All configs must share the scenario, seed list, and episode count;
    they are expected to differ in algorithm (running one algorithm
    twice is legal and yields identical rows).
    """
    if len(cfgs) < 2:
        raise ValueError("comparison needs at least two configs")
    first = cfgs[0].run
    for cfg in cfgs[1:]:
        if cfg.run.scenario != first.scenario:
            raise ValueError("configs must share one scenario")
        if cfg.run.seeds != first.seeds or cfg.run.episodes != first.episodes:
            raise ValueError("configs must share seeds and episode count")

    rows = []
    for cfg in cfgs:
        plateau_eps, sats, e_strat, e_non, plateaus = [], [], [], [], []
        for seed in cfg.run.seeds:
            metrics = _train_one_seed(cfg, seed)
            ep, plateau = episodes_to_plateau(
                [m.reward for m in metrics],
                cfg.run.ma_window, cfg.run.plateau_tail, cfg.run.convergence_level,
            )
            tail = _tail_slice(metrics, cfg.run.plateau_tail)
            plateau_eps.append(ep)
            plateaus.append(plateau)
            sats.append(float(np.mean([m.satisfaction for m in tail])))
            e_strat.append(float(np.mean([m.energy_strategic_j for m in tail])))
            e_non.append(float(np.mean([m.energy_nonstrategic_j for m in tail])))
        rows.append({
            "scenario": cfg.run.scenario,
            "algorithm": cfg.run.algorithm,
            "seeds": "|".join(str(s) for s in cfg.run.seeds),
            "episodes_to_plateau_mean": float(np.mean(plateau_eps)),
            "episodes_to_plateau_std": float(np.std(plateau_eps)),
            "final_satisfaction_mean": float(np.mean(sats)),
            "final_satisfaction_std": float(np.std(sats)),
            "energy_strategic_mean": float(np.mean(e_strat)),
            "energy_nonstrategic_mean": float(np.mean(e_non)),
            "plateau_reward_mean": float(np.mean(plateaus)),
        })

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COMPARISON_COLUMNS)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in COMPARISON_COLUMNS])
    return rows


# --- plot-data emission ---------------------------------------------------------

def emit_plot_data(
    metrics_path: str | Path, kind: str, out_path: str | Path | None = None
) -> Path:
    """Write one plot-ready delimited file derived from a run directory.

    ``metrics_path`` is a run directory or its metrics.csv. Kinds:
    heatmap (per-cell visits over the plateau tail), learning_curve
    (per-episode reward and its moving average), energy_bars and
    satisfaction_bars (end-of-run aggregates for bar charts).
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r} (known: {', '.join(PLOT_KINDS)})")
    path = Path(metrics_path)
    run_dir = path if path.is_dir() else path.parent
    metrics_file = run_dir / "metrics.csv"
    summary_file = run_dir / "summary.json"
    if not metrics_file.exists():
        raise FileNotFoundError(f"no metrics.csv in {run_dir}")
    if not summary_file.exists():
        raise FileNotFoundError(f"no summary.json in {run_dir}")
    metrics = read_metrics(metrics_file)
    with open(summary_file, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    out = Path(out_path) if out_path is not None else run_dir / f"plot_{kind}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)

    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if kind == "heatmap":
            tail = _tail_slice(metrics, float(summary["plateau_tail"]))
            n_cells = len(metrics[0].visits)
            n_side = int(summary["cells_per_side"])
            strategic = set(summary["strategic_cells"])
            writer.writerow(["cell_x", "cell_y", "visits", "is_strategic"])
            for i in range(n_cells):
                writer.writerow([
                    i % n_side, i // n_side,
                    sum(m.visits[i] for m in tail), int(i in strategic),
                ])
        elif kind == "learning_curve":
            ma = moving_average([m.reward for m in metrics], int(summary["ma_window"]))
            writer.writerow(["episode", "reward", "reward_ma", "swarm_size", "satisfaction"])
            for m, avg in zip(metrics, ma):
                writer.writerow([m.episode, _cell(m.reward), _cell(float(avg)),
                                 m.swarm_size, _cell(m.satisfaction)])
        elif kind == "energy_bars":
            writer.writerow(["algorithm", "scenario", "energy_strategic_j",
                             "energy_nonstrategic_j", "energy_total_j"])
            writer.writerow([
                summary["algorithm"], summary["scenario"],
                _cell(float(summary["energy_strategic_tail_mean"])),
                _cell(float(summary["energy_nonstrategic_tail_mean"])),
                _cell(float(summary["energy_total_tail_mean"])),
            ])
        else:  # satisfaction_bars
            tail = _tail_slice(metrics, float(summary["plateau_tail"]))
            sats = [m.satisfaction for m in tail]
            writer.writerow(["algorithm", "scenario", "swarm_size",
                             "satisfaction_mean", "satisfaction_std"])
            writer.writerow([
                summary["algorithm"], summary["scenario"], metrics[-1].swarm_size,
                _cell(float(np.mean(sats))), _cell(float(np.std(sats))),
            ])
    return out
