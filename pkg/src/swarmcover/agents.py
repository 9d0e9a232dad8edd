"""Learners for the coverage MDP: actor-critic, DQN, PPO, and a first-order
meta-initialization loop on top of the actor-critic.

The actor-critic keeps stale parameter copies that are refreshed at the
start of every episode; gradients are accumulated against the stale
copies over the whole episode and applied in one step afterwards (ascent
for the actor, descent for the critic). The critic additionally takes a
one-step temporal-difference term from a replay minibatch each episode.
The meta loop adapts a clone of the meta parameters on a sampled task
for a fixed number of episodes and then moves the meta parameters a
fraction of the way toward the mean adapted weights.

All updates are plain in-place numpy arithmetic, single threaded, and
deterministic given the generators passed in.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nets
from .env import N_ACTIONS


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.85
    learning_rate: float = 1e-4
    hidden: tuple[int, ...] = (64, 64)
    init_scale: float = 1.0
    replay_capacity: int = 10_000
    minibatch: int = 64
    target_refresh: int = 100
    dqn_update_interval: int = 4
    ppo_clip: float = 0.2
    ppo_epochs: int = 4
    meta_outer_lr: float = 0.5
    meta_inner_episodes: int = 10
    meta_tasks_per_update: int = 5
    meta_fraction: float = 0.5
    eps_start: float = 0.9
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6
    policy_epsilon: float = 0.0
    action_mode: str = "auto"  # auto | sample | greedy

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.replay_capacity < 1 or self.minibatch < 1:
            raise ValueError("replay capacity and minibatch must be positive")
        if not 0.0 <= self.ppo_clip < 1.0:
            raise ValueError("clip range must lie in [0, 1)")
        if self.action_mode not in ("auto", "sample", "greedy"):
            raise ValueError(f"unknown action mode {self.action_mode!r}")
        if not 0.0 <= self.meta_fraction < 1.0:
            raise ValueError("meta fraction must lie in [0, 1)")


@dataclass
class Transition:
    state: np.ndarray
    action: tuple[int, ...]
    reward: float
    next_state: np.ndarray
    done: bool = False


class ReplayMemory:
    """FIFO transition store with uniform minibatch sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.buffer: deque[Transition] = deque(maxlen=capacity)

    def push(self, transition: Transition) -> None:
        self.buffer.append(transition)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        if n > len(self.buffer):
            raise ValueError("cannot sample more transitions than stored")
        picks = rng.choice(len(self.buffer), size=n, replace=False)
        return [self.buffer[int(i)] for i in picks]

    def __len__(self) -> int:
        return len(self.buffer)


@dataclass
class PolicyParams:
    """Actor and critic weights plus the stale copies updates are computed on."""

    actor: dict
    critic: dict
    actor_cfg: nets.NetConfig
    critic_cfg: nets.NetConfig
    heads: int
    actor_stale: dict = field(default=None)
    critic_stale: dict = field(default=None)

    def __post_init__(self) -> None:
        if self.actor_stale is None:
            self.actor_stale = nets.clone_params(self.actor)
        if self.critic_stale is None:
            self.critic_stale = nets.clone_params(self.critic)

    def refresh_stale(self) -> None:
        self.actor_stale = nets.clone_params(self.actor)
        self.critic_stale = nets.clone_params(self.critic)

    def clone(self) -> "PolicyParams":
        return PolicyParams(
            nets.clone_params(self.actor),
            nets.clone_params(self.critic),
            self.actor_cfg,
            self.critic_cfg,
            self.heads,
            nets.clone_params(self.actor_stale),
            nets.clone_params(self.critic_stale),
        )


@dataclass
class GradAccumulator:
    d_actor: dict
    d_critic: dict

    @classmethod
    def zeros(cls, params: PolicyParams) -> "GradAccumulator":
        return cls(nets.zeros_like_params(params.actor), nets.zeros_like_params(params.critic))


@dataclass
class MetaState:
    """Meta parameters plus the inner/outer loop settings."""

    params: PolicyParams
    inner_episodes: int = 10
    inner_lr: float = 1e-4
    outer_lr: float = 0.5


def make_policy_params(
    state_dim: int, heads: int, cfg: AgentConfig, rng: np.random.Generator
) -> PolicyParams:
    actor_cfg = nets.NetConfig(state_dim, cfg.hidden, heads * N_ACTIONS)
    critic_cfg = nets.NetConfig(state_dim, cfg.hidden, 1)
    return PolicyParams(
        nets.init_params(actor_cfg, rng, cfg.init_scale),
        nets.init_params(critic_cfg, rng, cfg.init_scale),
        actor_cfg,
        critic_cfg,
        heads,
    )


def policy_forward(
    actor: dict, states: np.ndarray, cfg: nets.NetConfig, heads: int
) -> tuple[np.ndarray, np.ndarray, list]:
    """(logits[B, heads, A], probs[B, heads, A], cache)."""
    raw, cache = nets.forward(actor, states, cfg)
    logits = raw.reshape(raw.shape[0], heads, N_ACTIONS)
    return logits, nets.softmax(logits), cache

def value_forward(critic: dict, states: np.ndarray, cfg: nets.NetConfig) -> tuple[np.ndarray, list]:
    raw, cache = nets.forward(critic, states, cfg)
    return raw[:, 0], cache


def forward(params: PolicyParams, state: np.ndarray, stale: bool = False) -> tuple[np.ndarray, float]:
    """Per-UAV action distributions and the state value for one state."""
    actor = params.actor_stale if stale else params.actor
    critic = params.critic_stale if stale else params.critic
    _, probs, _ = policy_forward(actor, np.atleast_2d(state), params.actor_cfg, params.heads)
    values, _ = value_forward(critic, np.atleast_2d(state), params.critic_cfg)
    return probs[0], float(values[0])


# --- action selection --------------------------------------------------------

def epsilon_at(episode: int, total_episodes: int, cfg: AgentConfig) -> float:
    """Linear decay from eps_start to eps_end over the first
    ``eps_decay_frac`` share of the run, flat afterwards."""
    horizon = max(1, int(total_episodes * cfg.eps_decay_frac))
    if episode >= horizon:
        return cfg.eps_end
    frac = episode / horizon
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def select_action(
    scores: np.ndarray,
    active: int,
    epsilon: float,
    rng: np.random.Generator,
    mode: str = "greedy",
) -> tuple[int, ...]:
    """Pick one action id per active UAV from per-UAV scores.

    ``scores`` is (heads, actions): probabilities in sample mode,
    arbitrary preferences (e.g. Q-values) in greedy mode. With
    probability ``epsilon`` a UAV acts uniformly at random instead.
    Greedy ties resolve to the lowest action index.
    """
    acts = []
    for u in range(active):
        if epsilon > 0.0 and rng.random() < epsilon:
            acts.append(int(rng.integers(N_ACTIONS)))
        elif mode == "greedy":
            acts.append(int(np.argmax(scores[u])))
        else:
            p = np.asarray(scores[u], dtype=np.float64)
            p = p / p.sum()
            acts.append(int(rng.choice(N_ACTIONS, p=p)))
    return tuple(acts)


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Reward-to-go of each step of one episode."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in reversed(range(len(rewards))):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


# --- actor-critic -------------------------------------------------------------

def actor_critic_accumulate(
    params: PolicyParams,
    episode: Sequence[Transition],
    gamma: float,
    acc: GradAccumulator | None = None,
) -> GradAccumulator:
    """Episode gradients against the stale copies.

    Actor: ascent direction of sum_t log pi(a_t | s_t) * (R_t - V(s_t)),
    with R_t the discounted reward-to-go. Critic: descent direction of
    sum_t (R_t - V(s_t))^2. The advantage uses the stale critic. Passing
    an existing accumulator adds to it instead of starting from zero.
    """
    if not episode:
        raise ValueError("cannot accumulate over an empty episode")
    acc = acc if acc is not None else GradAccumulator.zeros(params)
    states = np.stack([t.state for t in episode])
    returns = discounted_returns([t.reward for t in episode], gamma)
    logits, probs, a_cache = policy_forward(
        params.actor_stale, states, params.actor_cfg, params.heads
    )
    values, v_cache = value_forward(params.critic_stale, states, params.critic_cfg)
    adv = returns - values

    dlogits = np.zeros_like(logits)
    for t, tr in enumerate(episode):
        for u, a in enumerate(tr.action):
            onehot = np.zeros(N_ACTIONS)
            onehot[a] = 1.0
            dlogits[t, u] = adv[t] * (onehot - probs[t, u])
    d_actor = nets.backward(
        params.actor_stale, a_cache, dlogits.reshape(len(episode), -1), params.actor_cfg
    )
    dvals = (-2.0 * adv)[:, None]  # d/dV of (R - V)^2
    d_critic = nets.backward(params.critic_stale, v_cache, dvals, params.critic_cfg)
    nets.accumulate(acc.d_actor, d_actor)
    nets.accumulate(acc.d_critic, d_critic)
    return acc


def critic_td_accumulate(
    params: PolicyParams,
    batch: Sequence[Transition],
    gamma: float,
    acc: GradAccumulator,
) -> None:
    """Add the replay minibatch one-step TD term to the critic gradient.

    Semi-gradient: the bootstrap target gamma * V(s') is held constant.
    """
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    rewards = np.array([t.reward for t in batch])
    live = np.array([0.0 if t.done else 1.0 for t in batch])
    values, cache = value_forward(params.critic_stale, states, params.critic_cfg)
    next_values, _ = value_forward(params.critic_stale, next_states, params.critic_cfg)
    targets = rewards + gamma * live * next_values
    dvals = (-2.0 * (targets - values))[:, None]
    grads = nets.backward(params.critic_stale, cache, dvals, params.critic_cfg)
    nets.accumulate(acc.d_critic, grads)


def apply_update(params: PolicyParams, acc: GradAccumulator, lr: float) -> None:
    """Gradient ascent on the actor, descent on the critic."""
    nets.add_scaled(params.actor, acc.d_actor, +lr)
    nets.add_scaled(params.critic, acc.d_critic, -lr)


# --- DQN ----------------------------------------------------------------------

def dqn_loss_and_grad(
    q_params: dict,
    target_params: dict,
    batch: Sequence[Transition],
    gamma: float,
    cfg: nets.NetConfig,
    heads: int,
) -> tuple[float, dict]:
    """Squared TD error of per-UAV Q heads against a frozen target net."""
    states = np.stack([t.state for t in batch])
    next_states = np.stack([t.next_state for t in batch])
    rewards = np.array([t.reward for t in batch])
    live = np.array([0.0 if t.done else 1.0 for t in batch])
    raw, cache = nets.forward(q_params, states, cfg)
    q = raw.reshape(len(batch), heads, N_ACTIONS)
    raw_next, _ = nets.forward(target_params, next_states, cfg)
    q_next = raw_next.reshape(len(batch), heads, N_ACTIONS)

    loss = 0.0
    dq = np.zeros_like(q)
    for t, tr in enumerate(batch):
        for u, a in enumerate(tr.action):
            target = rewards[t] + gamma * live[t] * q_next[t, u].max()
            err = q[t, u, a] - target
            loss += float(err * err)
            dq[t, u, a] = 2.0 * err
    grads = nets.backward(q_params, cache, dq.reshape(len(batch), -1), cfg)
    return loss, grads


def dqn_update(
    q_params: dict,
    target_params: dict,
    batch: Sequence[Transition],
    gamma: float,
    lr: float,
    cfg: nets.NetConfig,
    heads: int,
) -> float:
    """One semi-gradient descent step on the TD loss; returns the loss."""
    loss, grads = dqn_loss_and_grad(q_params, target_params, batch, gamma, cfg, heads)
    nets.add_scaled(q_params, grads, -lr)
    return loss


# --- PPO ----------------------------------------------------------------------

def joint_log_prob(probs: np.ndarray, actions: Sequence[tuple[int, ...]]) -> np.ndarray:
    """Log probability of each joint action under per-UAV distributions."""
    out = np.zeros(len(actions))
    for t, acts in enumerate(actions):
        for u, a in enumerate(acts):
            out[t] += np.log(max(probs[t, u, a], 1e-12))
    return out


def ppo_surrogate_and_grad(
    actor: dict,
    old_actor: dict,
    batch: Sequence[Transition],
    advantages: np.ndarray,
    clip_eps: float,
    cfg: nets.NetConfig,
    heads: int,
) -> tuple[float, dict]:
    """Clipped surrogate objective and its ascent gradient.

    Per sample: min(rho * A, clip(rho, 1 - eps, 1 + eps) * A) with the
    joint-action probability ratio rho. The unclipped branch is used
    only where it is strictly smaller; elsewhere the clipped branch
    contributes a gradient only strictly inside the clip window, so a
    zero-width window pins the ratio and kills the actor gradient.
    """
    states = np.stack([t.state for t in batch])
    actions = [t.action for t in batch]
    logits, probs, cache = policy_forward(actor, states, cfg, heads)
    _, old_probs, _ = policy_forward(old_actor, states, cfg, heads)
    logp = joint_log_prob(probs, actions)
    logp_old = joint_log_prob(old_probs, actions)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    s_plain = ratio * advantages
    s_clip = clipped * advantages
    objective = float(np.minimum(s_plain, s_clip).sum())

    inside = (ratio > 1.0 - clip_eps) & (ratio < 1.0 + clip_eps)
    use_plain = s_plain < s_clip
    dratio = np.where(use_plain, advantages, advantages * inside)
    dlogp = dratio * ratio  # drho/dlogp = rho

    dlogits = np.zeros_like(logits)
    for t, acts in enumerate(actions):
        for u, a in enumerate(acts):
            onehot = np.zeros(N_ACTIONS)
            onehot[a] = 1.0
            dlogits[t, u] = dlogp[t] * (onehot - probs[t, u])
    grads = nets.backward(actor, cache, dlogits.reshape(len(batch), -1), cfg)
    return objective, grads


def ppo_update(
    params: PolicyParams,
    rollout: Sequence[Transition],
    clip_eps: float,
    epochs: int,
    gamma: float,
    lr: float,
) -> None:
    """Several clipped-surrogate epochs on one rollout, plus critic fits.

    Advantages are reward-to-go minus the stale critic's values; the
    stale copies play the role of the pre-update policy.
    """
    if not rollout:
        raise ValueError("cannot update from an empty rollout")
    if epochs < 1:
        raise ValueError("need at least one epoch")
    states = np.stack([t.state for t in rollout])
    returns = discounted_returns([t.reward for t in rollout], gamma)
    values_old, _ = value_forward(params.critic_stale, states, params.critic_cfg)
    adv = returns - values_old
    for _ in range(epochs):
        _, g_actor = ppo_surrogate_and_grad(
            params.actor, params.actor_stale, rollout, adv, clip_eps,
            params.actor_cfg, params.heads,
        )
        nets.add_scaled(params.actor, g_actor, +lr)
        values, v_cache = value_forward(params.critic, states, params.critic_cfg)
        dvals = (-2.0 * (returns - values))[:, None]
        g_critic = nets.backward(params.critic, v_cache, dvals, params.critic_cfg)
        nets.add_scaled(params.critic, g_critic, -lr)


# --- meta loop ------------------------------------------------------------------

def run_training_episode(env, task, learner, rng: np.random.Generator, epsilon: float) -> dict:
    """One full episode of interaction and learning; returns episode stats."""
    state = env.reset(task, rng_seed=int(rng.integers(2**63 - 1)))
    learner.begin_episode()
    while True:
        actions = learner.act(state, epsilon, rng)
        out = env.step(actions)
        learner.record(Transition(state, actions, out.reward, out.state, out.done))
        state = out.state
        if out.done:
            break
    learner.finish_episode(rng)
    return env.episode_stats()


def meta_adapt(
    meta: MetaState,
    env,
    task,
    rng: np.random.Generator,
    agent_cfg: AgentConfig,
    recorder=None,
) -> PolicyParams:
    """Adapt a clone of the meta parameters to one task.

    Runs ``meta.inner_episodes`` actor-critic episodes starting from a
    copy of the meta weights and returns the adapted copy; the meta
    parameters themselves are never touched.
    """
    if meta.inner_episodes < 1:
        raise ValueError("inner loop needs at least one episode")
    learner = ActorCriticLearner(meta.params.clone(), agent_cfg, lr=meta.inner_lr)
    for _ in range(meta.inner_episodes):
        stats = run_training_episode(env, task, learner, rng, epsilon=agent_cfg.policy_epsilon)
        if recorder is not None:
            recorder(stats)
    return learner.params


def meta_outer_update(meta: MetaState, adapted: Sequence[PolicyParams]) -> None:
    """Move the meta weights toward the mean adapted weights.

    First-order interpolation: meta += outer_lr * mean(adapted - meta),
    applied key by key to actor and critic. Stale copies follow.
    """
    if not adapted:
        raise ValueError("need at least one adapted parameter set")
    n = len(adapted)
    for key in meta.params.actor:
        delta = sum(a.actor[key] - meta.params.actor[key] for a in adapted) / n
        meta.params.actor[key] += meta.outer_lr * delta
    for key in meta.params.critic:
        delta = sum(a.critic[key] - meta.params.critic[key] for a in adapted) / n
        meta.params.critic[key] += meta.outer_lr * delta
    meta.params.refresh_stale()


# --- learner objects --------------------------------------------------------------

class ActorCriticLearner:
    """Episode-batched actor-critic with a replay-refined critic."""

    uses_schedule = False

    def __init__(self, params: PolicyParams, cfg: AgentConfig, lr: float | None = None) -> None:
        self.params = params
        self.cfg = cfg
        self.lr = cfg.learning_rate if lr is None else lr
        self.memory = ReplayMemory(cfg.replay_capacity)
        self._episode: list[Transition] = []
        self.mode = "sample" if cfg.action_mode == "auto" else cfg.action_mode

    def begin_episode(self) -> None:
        self.params.refresh_stale()
        self._episode = []

    def act(self, state, epsilon, rng) -> tuple[int, ...]:
        probs, _ = forward(self.params, state, stale=True)
        active = _active_count(state, self.params.heads)
        return select_action(probs, active, epsilon, rng, self.mode)

    def record(self, transition: Transition) -> None:
        self._episode.append(transition)
        self.memory.push(transition)

    def finish_episode(self, rng) -> None:
        if not self._episode:
            return
        acc = actor_critic_accumulate(self.params, self._episode, self.cfg.gamma)
        if len(self.memory) >= self.cfg.minibatch:
            batch = self.memory.sample(self.cfg.minibatch, rng)
            critic_td_accumulate(self.params, batch, self.cfg.gamma, acc)
        apply_update(self.params, acc, self.lr)
        self._episode = []


class DQNLearner:
    """Factorised per-UAV Q-learning with a periodically frozen target."""

    uses_schedule = True

    def __init__(self, state_dim: int, heads: int, cfg: AgentConfig, rng: np.random.Generator) -> None:
        self.cfg = cfg
        self.net_cfg = nets.NetConfig(state_dim, cfg.hidden, heads * N_ACTIONS)
        self.heads = heads
        self.q = nets.init_params(self.net_cfg, rng, cfg.init_scale)
        self.target = nets.clone_params(self.q)
        self.memory = ReplayMemory(cfg.replay_capacity)
        self.mode = "greedy" if cfg.action_mode == "auto" else cfg.action_mode
        self._steps = 0
        self._updates = 0
        self._rng = rng

    def begin_episode(self) -> None:
        pass

    def act(self, state, epsilon, rng) -> tuple[int, ...]:
        raw, _ = nets.forward(self.q, np.atleast_2d(state), self.net_cfg)
        scores = raw.reshape(self.heads, N_ACTIONS)
        active = _active_count(state, self.heads)
        return select_action(scores, active, epsilon, rng, self.mode)

    def record(self, transition: Transition) -> None:
        self.memory.push(transition)
        self._steps += 1
        if len(self.memory) >= self.cfg.minibatch and self._steps % self.cfg.dqn_update_interval == 0:
            batch = self.memory.sample(self.cfg.minibatch, self._rng)
            dqn_update(
                self.q, self.target, batch, self.cfg.gamma,
                self.cfg.learning_rate, self.net_cfg, self.heads,
            )
            self._updates += 1
            if self._updates % self.cfg.target_refresh == 0:
                self.target = nets.clone_params(self.q)

    def finish_episode(self, rng) -> None:
        pass


class PPOLearner:
    """One-episode rollouts with several clipped-surrogate epochs."""

    uses_schedule = False

    def __init__(self, params: PolicyParams, cfg: AgentConfig) -> None:
        self.params = params
        self.cfg = cfg
        self._rollout: list[Transition] = []
        self.mode = "sample" if cfg.action_mode == "auto" else cfg.action_mode

    def begin_episode(self) -> None:
        self.params.refresh_stale()
        self._rollout = []

    def act(self, state, epsilon, rng) -> tuple[int, ...]:
        probs, _ = forward(self.params, state, stale=True)
        active = _active_count(state, self.params.heads)
        return select_action(probs, active, epsilon, rng, self.mode)

    def record(self, transition: Transition) -> None:
        self._rollout.append(transition)

    def finish_episode(self, rng) -> None:
        if not self._rollout:
            return
        ppo_update(
            self.params, self._rollout, self.cfg.ppo_clip, self.cfg.ppo_epochs,
            self.cfg.gamma, self.cfg.learning_rate,
        )
        self._rollout = []


class RandomPolicy:
    """Uniform action baseline; never learns."""

    uses_schedule = False

    def __init__(self, heads: int) -> None:
        self.heads = heads

    def begin_episode(self) -> None:
        pass

    def act(self, state, epsilon, rng) -> tuple[int, ...]:
        active = _active_count(state, self.heads)
        return tuple(int(a) for a in rng.integers(0, N_ACTIONS, size=active))

    def record(self, transition: Transition) -> None:
        pass

    def finish_episode(self, rng) -> None:
        pass


def _active_count(state: np.ndarray, heads: int) -> int:
    """Recover the active-UAV count from the trailing state feature."""
    return int(round(float(state[-1]) * heads))


ALGORITHMS = ("meta_rl", "actor_critic", "dqn", "ppo", "random")


def make_learner(
    algorithm: str,
    state_dim: int,
    heads: int,
    cfg: AgentConfig,
    rng: np.random.Generator,
    init: PolicyParams | None = None,
):
    """Learner factory; ``init`` seeds actor-critic style learners."""
    if algorithm in ("actor_critic", "meta_rl"):
        params = init.clone() if init is not None else make_policy_params(state_dim, heads, cfg, rng)
        return ActorCriticLearner(params, cfg)
    if algorithm == "ppo":
        params = init.clone() if init is not None else make_policy_params(state_dim, heads, cfg, rng)
        return PPOLearner(params, cfg)
    if algorithm == "dqn":
        return DQNLearner(state_dim, heads, cfg, rng)
    if algorithm == "random":
        return RandomPolicy(heads)
    raise ValueError(f"unknown algorithm {algorithm!r} (known: {', '.join(ALGORITHMS)})")
