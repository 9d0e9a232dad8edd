"""Episodic MDP over the mission world for a centrally-controlled UAV swarm.

One environment step is one mission slot: every active UAV picks one of
five moves (the four compass directions or hover), moves between cell
centers, and then automatically collects at most one packet from an
uncollected device assigned to its cell. Moves off the grid border
degrade to hover. Two UAVs are never allowed to occupy one cell: moves
that would end on an occupied or contested cell are cancelled and the
offending movers are penalised.

The scalar step reward is
  +1 for every UAV that did not collide and whose link rate, altitude
     and mission deadline checks all pass,
  a coverage bonus of 1/(1 + k) for every UAV sitting on a strategic
     cell with remaining demand, where k counts demand units already
     served this frame,
  -1 for every colliding UAV, and
  an energy shaping term: -lambda_energy times the step energy of the
     swarm in units of one hover slot of operating energy.

An episode lasts exactly ``slots`` steps. Given the same seed, task and
action sequence, every outcome is reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import link_budget as lb
from . import mission as ms

#: Action index -> (dcol, drow); the last entry is hover.
ACTIONS = ("north", "south", "east", "west", "hover")
_DELTAS = ((0, 1), (0, -1), (1, 0), (-1, 0), (0, 0))
N_ACTIONS = len(ACTIONS)


@dataclass(frozen=True)
class EnvConfig:
    """Swarm-level knobs that are not mission geometry."""

    max_swarm: int = 7
    num_strategic: int = 3
    initial_demand: float = 3.0
    lambda_energy: float = 0.1
    device_count: int = 25
    swarm_size: int = 4
    swarm_min: int = 3
    swarm_max: int = 7
    strategic_cells: tuple[int, ...] = (6, 13, 21)
    device_seed: int = 7
    def __post_init__(self) -> None:
        if not 1 <= self.swarm_size <= self.max_swarm:
            raise ValueError("default swarm size must lie in [1, max_swarm]")
        if not 1 <= self.swarm_min <= self.swarm_max <= self.max_swarm:
            raise ValueError("swarm size range must fit inside max_swarm")
        if self.lambda_energy < 0.0:
            raise ValueError("shaping weight must be non-negative")
        if len(self.strategic_cells) != self.num_strategic:
            raise ValueError("strategic cell list must match num_strategic")


@dataclass(frozen=True)
class TaskSpec:
    """One concrete scenario drawn from the task distribution."""

    swarm_size: int
    strategic_cells: tuple[int, ...]
    device_seed: int
    initial_demands: tuple[float, ...]


@dataclass(frozen=True)
class SwarmEvent:
    """A scheduled swarm-size change applied between episodes."""

    episode: int
    kind: str  # "join" or "leave"
    count: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("join", "leave"):
            raise ValueError(f"unknown swarm event kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("event count must be at least 1")


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def strategic_reward(satisfied_demand_sum: float) -> float:
    """Coverage bonus after ``satisfied_demand_sum`` units already served.

    Equals 1 for the first unit of a frame and decays harmonically, so
    early coverage is worth more than piling onto late demand.
    """
    if satisfied_demand_sum < 0.0:
        raise ValueError("satisfied demand cannot be negative")
    return 1.0 / (1.0 + satisfied_demand_sum)


def move_target(cell_index: int, action: int, n_side: int) -> int:
    """Destination cell of one action, with border moves degrading to stay."""
    dcol, drow = _DELTAS[int(action)]
    col, row = cell_index % n_side, cell_index // n_side
    col2, row2 = col + dcol, row + drow
    if 0 <= col2 < n_side and 0 <= row2 < n_side:
        return row2 * n_side + col2
    return cell_index


def resolve_moves(
    origins: Sequence[int], targets: Sequence[int]
) -> tuple[list[int], list[bool]]:
    """Cancel every move that would end on a contested or occupied cell.

    Origins must be pairwise distinct. Movers bounce back to their
    origin (and are flagged) whenever their destination is claimed by
    any other UAV, including movers cancelled in an earlier sweep.
    Hovering UAVs never collide. Swaps and follow-the-leader chains
    resolve to distinct cells and are allowed.
    """
    if len(set(origins)) != len(origins):
        raise ValueError("UAVs must start on distinct cells")
    final = list(targets)
    moving = [f != o for f, o in zip(final, origins)]
    collided = [False] * len(origins)
    changed = True
    while changed:
        changed = False
        counts: dict[int, int] = {}
        for cell in final:
            counts[cell] = counts.get(cell, 0) + 1
        for i, origin in enumerate(origins):
            if moving[i] and counts[final[i]] > 1:
                final[i] = origin
                moving[i] = False
                collided[i] = True
                changed = True
    return final, collided


def build_rate_table(
    world: ms.GridWorld,
    params: lb.AirGroundParams,
    radio: lb.RadioConfig,
    altitude_m: float,
) -> dict[tuple[int, int], float]:
    """Uplink rate for every (cell, device-in-cell) pair at fixed altitude."""
    table = {}
    for cell_index, device_ids in world.cell_device_queue.items():
        cx, cy = world.cell_center(cell_index)
        for dev_id in device_ids:
            geom = lb.LinkGeometry((cx, cy, altitude_m), world.devices[dev_id].position_xy)
            table[(cell_index, dev_id)] = lb.achievable_rate_bps(geom, params, radio)
    return table


class CoverageEnv:
    """Data-collection MDP over a :class:`ms.GridWorld`.

    The observation is a flat float vector: one cell one-hot per UAV
    slot (inactive slots stay zero), then per strategic location a cell
    one-hot plus its normalised remaining demand, then the visited-cell
    bitmap of the frame, then the normalised active-UAV count. All
    features lie in [0, 1].
    """

    def __init__(
        self,
        mission_cfg: ms.MissionConfig,
        link_params: lb.AirGroundParams,
        radio: lb.RadioConfig,
        env_cfg: EnvConfig,
    ) -> None:
        if env_cfg.max_swarm > mission_cfg.n_cells:
            raise ValueError("cannot host more UAVs than cells")
        self.mission_cfg = mission_cfg
        self.link_params = link_params
        self.radio = radio
        self.cfg = env_cfg
        self.altitude_m = min(mission_cfg.uav_altitude_m, lb.max_altitude_m(link_params))
        self.energy_norm_j = mission_cfg.p_oper_watts * mission_cfg.slot_seconds
        self.world: ms.GridWorld | None = None
        self.task: TaskSpec | None = None
        self.current_swarm_size = env_cfg.swarm_size
        self._rng = np.random.default_rng(0)
        self._done = True
        self._slot = 0

    # --- sizing -----------------------------------------------------------

    @property
    def n_cells(self) -> int:
        return self.mission_cfg.n_cells

    @property
    def state_dim(self) -> int:
        c = self.n_cells
        return c * self.cfg.max_swarm + (c + 1) * self.cfg.num_strategic + c + 1

    @property
    def slot(self) -> int:
        return self._slot

    @property
    def done(self) -> bool:
        return self._done

    # --- tasks ------------------------------------------------------------

    def nominal_task(self) -> TaskSpec:
        """The configured scenario task, untouched by sampling or events."""
        return TaskSpec(
            swarm_size=self.cfg.swarm_size,
            strategic_cells=tuple(self.cfg.strategic_cells),
            device_seed=self.cfg.device_seed,
            initial_demands=(self.cfg.initial_demand,) * self.cfg.num_strategic,
        )

    def sample_task(self, rng: np.random.Generator) -> TaskSpec:
        """Draw a task: swarm size from the configured range, fresh
        distinct strategic cells, fresh device layout seed."""
        size = int(rng.integers(self.cfg.swarm_min, self.cfg.swarm_max + 1))
        cells = rng.choice(self.n_cells, size=self.cfg.num_strategic, replace=False)
        seed = int(rng.integers(0, 2**31 - 1))
        demands = (self.cfg.initial_demand,) * self.cfg.num_strategic
        return TaskSpec(size, tuple(int(c) for c in np.sort(cells)), seed, demands)

    def apply_swarm_event(self, event: SwarmEvent) -> int:
        """Resize the swarm; returns the new size. Effective at the next
        reset (events are scheduled on episode boundaries); when applied
        mid-episode joining UAVs spawn immediately on free cells."""
        if event.kind == "join":
            new_size = self.current_swarm_size + event.count
            if new_size > self.cfg.max_swarm:
                raise ValueError("join would exceed the maximum swarm size")
        else:
            new_size = self.current_swarm_size - event.count
            if new_size < 1:
                raise ValueError("leave would empty the swarm")
        self.current_swarm_size = new_size
        world = self.world
        if world is not None and not self._done:
            if event.kind == "leave":
                for uav in world.uavs[new_size:]:
                    uav.active = False
                world.uavs = world.uavs[:new_size]
            else:
                occupied = {u.cell_index for u in world.uavs}
                free = [c for c in range(self.n_cells) if c not in occupied]
                fresh = self._rng.choice(len(free), size=new_size - len(world.uavs), replace=False)
                for i, pick in enumerate(fresh):
                    uav = ms.UavState(len(world.uavs) + i, free[int(pick)], self.altitude_m)
                    uav.trajectory.append((self._slot, uav.cell_index))
                    world.uavs.append(uav)
        return new_size

    # --- episode lifecycle --------------------------------------------------

    def reset(
        self,
        task: TaskSpec | None = None,
        rng_seed: int | None = None,
        start_cells: Sequence[int] | None = None,
    ) -> np.ndarray:
        """Build the world for ``task`` and start a fresh frame.

        Start cells are sampled uniformly without collision unless given
        explicitly. The seed fixes start cells and nothing else; the
        device layout comes from the task's own seed.
        """
        if task is None:
            # A bare reset keeps the swarm size left behind by events.
            task = task_with_swarm(self.nominal_task(), self.current_swarm_size)
        if task.swarm_size > self.cfg.max_swarm:
            raise ValueError("task swarm size exceeds max_swarm")
        if task.swarm_size > self.n_cells:
            raise ValueError("more UAVs than cells")
        if len(task.strategic_cells) != self.cfg.num_strategic:
            raise ValueError("task must carry num_strategic strategic cells")
        self.task = task
        self.current_swarm_size = task.swarm_size
        self._rng = np.random.default_rng(rng_seed)

        devices = ms.default_device_layout(
            self.mission_cfg,
            task.strategic_cells,
            seed=task.device_seed,
            count=max(self.cfg.device_count, len(task.strategic_cells)),
            tx_watts=self.radio.device_tx_watts,
        )
        world = ms.build_grid(
            self.mission_cfg, devices, task.strategic_cells, task.initial_demands
        )
        if start_cells is None:
            picks = self._rng.choice(self.n_cells, size=task.swarm_size, replace=False)
            start_cells = [int(c) for c in picks]
        elif len(set(start_cells)) != task.swarm_size:
            raise ValueError("start cells must be distinct and match the swarm size")
        for uid, cell in enumerate(start_cells):
            uav = ms.UavState(uid, int(cell), self.altitude_m)
            uav.trajectory.append((0, int(cell)))
            world.uavs.append(uav)
        self.world = world
        self.rate_table = build_rate_table(world, self.link_params, self.radio, self.altitude_m)
        self.altitude_ok = self.altitude_m <= lb.max_altitude_m(self.link_params)

        self._slot = 0
        self._done = False
        self._collected: set[int] = set()
        self._satisfied_units = 0.0
        self._total_demand = float(sum(task.initial_demands))
        self._d_com = 0.0
        self._d_data = 0.0
        self._collisions = 0
        self._visits = np.zeros(self.n_cells, dtype=np.int64)
        self._visited = np.zeros(self.n_cells, dtype=np.float64)
        self._cell_energy = np.zeros(self.n_cells, dtype=np.float64)
        self._reward_sum = 0.0
        return self.encode_state()

    def step(self, actions: Sequence[int]) -> StepOutcome:
        """Advance one slot. ``actions`` holds one action id per active UAV."""
        if self._done or self.world is None:
            raise RuntimeError("step() called on a finished episode; call reset()")
        world = self.world
        uavs = world.active_uavs()
        if len(actions) < len(uavs):
            raise ValueError("need one action per active UAV")
        n_side = self.mission_cfg.cells_per_side

        origins = [u.cell_index for u in uavs]
        targets = [
            move_target(uav.cell_index, action, n_side)
            for uav, action in zip(uavs, actions)
        ]
        finals, collided = resolve_moves(origins, targets)

        self._slot += 1
        step_energy = 0.0
        rate_ok = [True] * len(uavs)
        collected_now = []
        for i, uav in enumerate(uavs):
            leg_t = 0.0
            if finals[i] != origins[i]:
                leg_t = ms.travel_time_s(
                    (*world.cell_center(origins[i]), uav.altitude_m),
                    (*world.cell_center(finals[i]), uav.altitude_m),
                    self.mission_cfg.speed_mps,
                )
            uav.cell_index = finals[i]
            collect_t = 0.0
            # A cancelled mover forfeits its slot: no move, no collection.
            dev_id = None if collided[i] else self._next_uncollected(finals[i])
            if dev_id is not None:
                rate = self.rate_table[(finals[i], dev_id)]
                collect_t = world.devices[dev_id].packet_bits / rate
                self._collected.add(dev_id)
                rate_ok[i] = lb.rate_feasible(rate, self.radio)
                if finals[i] in world.strategic_cells:
                    uav.served_strategic = True
                collected_now.append(dev_id)
            uav.d_com_s += leg_t
            uav.d_data_s += collect_t
            e = ms.uav_energy_j(leg_t + collect_t, collect_t, self.mission_cfg)
            uav.energy_j += e
            uav.trajectory.append((self._slot, finals[i]))
            self._d_com += leg_t
            self._d_data += collect_t
            self._cell_energy[finals[i]] += e
            self._visits[finals[i]] += 1
            self._visited[finals[i]] = 1.0
            step_energy += e

        deadline_ok = ms.meets_deadline(
            ms.total_delay_s(self._d_data, self._d_com), self.mission_cfg.t_max_seconds
        )
        reward = 0.0
        ok_flags = []
        for i in range(len(uavs)):
            if collided[i]:
                reward -= 1.0
                ok_flags.append(False)
            elif rate_ok[i] and self.altitude_ok and deadline_ok:
                reward += 1.0
                ok_flags.append(True)
            else:
                ok_flags.append(False)
        self._collisions += sum(collided)

        bonuses = 0.0
        strategic_by_cell = {s.cell_index: s for s in world.strategic}
        for i, uav in enumerate(uavs):
            loc = strategic_by_cell.get(finals[i])
            if loc is not None and loc.demand > 0.0:
                bonus = strategic_reward(self._satisfied_units)
                bonuses += bonus
                loc.demand = max(0.0, loc.demand - 1.0)
                self._satisfied_units += 1.0
        reward += bonuses
        shaping = self.cfg.lambda_energy * step_energy / self.energy_norm_j
        reward -= shaping
        self._reward_sum += reward

        self._done = self._slot >= self.mission_cfg.slots
        info = {
            "slot": self._slot,
            "collided": collided,
            "constraint_ok": ok_flags,
            "deadline_ok": deadline_ok,
            "rate_ok": rate_ok,
            "step_energy_j": step_energy,
            "bonuses": bonuses,
            "shaping": shaping,
            "collected": collected_now,
            "cells": finals,
        }
        return StepOutcome(self.encode_state(), reward, self._done, info)

    def _next_uncollected(self, cell_index: int) -> int | None:
        for dev_id in self.world.device_queue(cell_index):
            if dev_id not in self._collected:
                return dev_id
        return None

    # --- observations and accounting ---------------------------------------

    def encode_state(self) -> np.ndarray:
        """Flat observation vector for the current world state."""
        world = self.world
        if world is None:
            raise RuntimeError("encode_state() before reset()")
        c = self.n_cells
        vec = np.zeros(self.state_dim, dtype=np.float64)
        for uav in world.uavs:
            if uav.active and uav.id < self.cfg.max_swarm:
                vec[uav.id * c + uav.cell_index] = 1.0
        base = c * self.cfg.max_swarm
        for i, loc in enumerate(world.strategic):
            vec[base + i * (c + 1) + loc.cell_index] = 1.0
            if loc.initial_demand > 0.0:
                vec[base + i * (c + 1) + c] = loc.demand / loc.initial_demand
        base += (c + 1) * self.cfg.num_strategic
        vec[base : base + c] = self._visited
        vec[base + c] = len(world.active_uavs()) / self.cfg.max_swarm
        return vec

    def episode_stats(self) -> dict:
        """Accounting snapshot used by the harness after each episode."""
        world = self.world
        strat = sorted(world.strategic_cells)
        strategic_energy = float(sum(self._cell_energy[c] for c in strat))
        total_energy = float(self._cell_energy.sum())
        per_uav = [(u.energy_j, u.served_strategic) for u in world.uavs]
        return {
            "reward": self._reward_sum,
            "swarm_size": len(world.active_uavs()),
            "steps": self._slot,
            "energy_total_j": total_energy,
            "energy_masked_j": float(ms.swarm_energy_j(per_uav)),
            "energy_strategic_j": strategic_energy,
            "energy_nonstrategic_j": total_energy - strategic_energy,
            "satisfied_units": self._satisfied_units,
            "total_demand": self._total_demand,
            "satisfaction": (
                self._satisfied_units / self._total_demand if self._total_demand else 1.0
            ),
            "collisions": self._collisions,
            "d_data_s": self._d_data,
            "d_com_s": self._d_com,
            "coverage_ok": ms.strategic_coverage_satisfied(world),
            "visits": self._visits.copy(),
        }


def make_env(
    mission_cfg: ms.MissionConfig | None = None,
    link_params: lb.AirGroundParams | None = None,
    radio: lb.RadioConfig | None = None,
    env_cfg: EnvConfig | None = None,
) -> CoverageEnv:
    """Environment with every default filled in (urban propagation)."""
    return CoverageEnv(
        mission_cfg or ms.MissionConfig(),
        link_params or lb.params_from_preset("urban"),
        radio or lb.RadioConfig(),
        env_cfg or EnvConfig(),
    )


def task_with_swarm(task: TaskSpec, swarm_size: int) -> TaskSpec:
    return replace(task, swarm_size=swarm_size)
