"""Minimal kinematic highway and merge simulator.

Vehicles live on a straight multi-lane road and are described by a lane
index and a longitudinal position. The ego vehicle follows discrete
meta-actions; every other vehicle keeps its lane and runs a two-parameter
car-following rule (brake in proportion to how far the time gap to the
leader is below ``time_gap`` seconds, otherwise relax toward its own target
speed). Lane changes complete at the decision step.

Lane 0 is the rightmost lane. In the merge scenario lane 0 is an on-ramp
that ends at ``ramp_end``; staying on it past the end counts as a crash.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

OBS_SHAPE = (5, 5)
N_ACTIONS = 5


class Action(IntEnum):
    LANE_LEFT = 0
    IDLE = 1
    LANE_RIGHT = 2
    FASTER = 3
    SLOWER = 4


class ConfigurationError(ValueError):
    pass


class UsageError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "highway"
    lane_count: int = 4
    other_vehicle_count: int = 20
    duration_steps: int = 40
    policy_frequency: int = 1
    simulation_frequency: int = 5
    v_min: float = 20.0
    v_max: float = 30.0
    speed_step: float = 2.5
    w_speed: float = 0.8
    w_right_lane: float = 0.2
    w_collision: float = -1.0
    seed: int = 0
    lane_width: float = 4.0
    vehicle_length: float = 5.0
    vehicle_width: float = 2.0
    perception_range: float = 90.0
    npc_speed_range: tuple[float, float] = (22.0, 27.0)
    spawn_window: tuple[float, float] = (-60.0, 460.0)
    min_spawn_gap: float = 15.0
    time_gap: float = 1.5
    max_brake: float = 6.0
    relax_rate: float = 0.6
    ego_gain: float = 1.6
    ego_max_accel: float = 5.0
    ego_min_target: float = 10.0
    ramp_end: float = 170.0

    def __post_init__(self):
        if self.kind not in ("highway", "merge"):
            raise ConfigurationError(f"unknown scenario kind {self.kind!r}")
        if self.duration_steps < 1:
            raise ConfigurationError("duration_steps must be >= 1")
        if not self.v_min < self.v_max:
            raise ConfigurationError("v_min must be below v_max")
        if self.lane_count < 1 or (self.kind == "merge" and self.lane_count < 2):
            raise ConfigurationError("not enough lanes for scenario")
        if self.other_vehicle_count < 0:
            raise ConfigurationError("other_vehicle_count must be >= 0")
        if self.simulation_frequency % self.policy_frequency:
            raise ConfigurationError("simulation_frequency must be a multiple of policy_frequency")

    @property
    def right_lane(self) -> int:
        """Lane earning the right-lane bonus: the rightmost through lane."""
        return 1 if self.kind == "merge" else 0

    @property
    def max_step_reward(self) -> float:
        return self.w_speed + self.w_right_lane


def highway_config(**overrides) -> ScenarioConfig:
    return replace(ScenarioConfig(), **overrides)


def merge_config(**overrides) -> ScenarioConfig:
    base = ScenarioConfig(
        kind="merge",
        lane_count=3,
        other_vehicle_count=8,
        duration_steps=15,
        spawn_window=(-80.0, 260.0),
    )
    return replace(base, **overrides)


def scenario_config(kind: str, **overrides) -> ScenarioConfig:
    if kind == "highway":
        return highway_config(**overrides)
    if kind == "merge":
        return merge_config(**overrides)
    raise ConfigurationError(f"unknown scenario kind {kind!r}")


@dataclass(frozen=True)
class VehicleState:
    lane: int
    position: float
    speed: float
    length: float = 5.0
    width: float = 2.0
    target_speed: float = 0.0


def collision_check(a: VehicleState, b: VehicleState) -> bool:
    return a.lane == b.lane and abs(a.position - b.position) < 0.5 * (a.length + b.length)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    crashed: bool
    info: dict = field(default_factory=dict)


class DrivingEnv:
    """One mutable simulator instance; index 0 of every state array is the ego."""

    def __init__(self, config: ScenarioConfig | None = None):
        self.config = config or ScenarioConfig()
        self._ready = False
        self.done = True

    # -- episode control ----------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        cfg = self.config
        self.seed = cfg.seed if seed is None else int(seed)
        rng = np.random.default_rng(self.seed)
        n = cfg.other_vehicle_count + 1
        self.lane = np.zeros(n, dtype=np.int64)
        self.pos = np.zeros(n)
        self.speed = np.zeros(n)
        self.target = np.zeros(n)
        self.length = np.full(n, cfg.vehicle_length)

        if cfg.kind == "highway":
            self.lane[0] = rng.integers(cfg.lane_count)
            npc_lanes = np.arange(cfg.lane_count)
        else:
            self.lane[0] = 0
            npc_lanes = np.arange(1, cfg.lane_count)
        self.speed[0] = self.target[0] = 0.7 * cfg.v_max
        self.x_ref = cfg.ramp_end if cfg.kind == "merge" else 0.0

        lo, hi = cfg.spawn_window
        clearance = cfg.vehicle_length + cfg.min_spawn_gap
        for i in range(1, n):
            for _ in range(200):
                lane = int(rng.choice(npc_lanes))
                pos = float(rng.uniform(lo, hi))
                same = self.lane[:i] == lane
                if np.all(np.abs(self.pos[:i][same] - pos) >= clearance):
                    break
            else:
                raise ConfigurationError(
                    f"could not place {cfg.other_vehicle_count} vehicles without overlap "
                    f"in a {hi - lo:.0f} m window"
                )
            self.lane[i] = lane
            self.pos[i] = pos
            self.speed[i] = self.target[i] = rng.uniform(*cfg.npc_speed_range)

        self.steps = 0
        self.crashed = False
        self.done = False
        self.lateral = 0.0
        self._ready = True
        return self.observe()

    def step(self, action: int) -> StepResult:
        if not self._ready or self.done:
            raise UsageError("step() called on a finished episode; call reset() first")
        cfg = self.config
        action = Action(int(action))
        self._apply_action(action)

        substeps = cfg.simulation_frequency // cfg.policy_frequency
        dt = 1.0 / cfg.simulation_frequency
        crashed = self._ego_collides()
        for _ in range(substeps):
            if crashed:
                break
            self._advance(dt)
            crashed = self._ego_collides()

        self.steps += 1
        self.crashed = crashed
        self.done = crashed or self.steps >= cfg.duration_steps
        reward = self.reward(self.speed[0], int(self.lane[0]), crashed)
        return StepResult(self.observe(), reward, self.done, crashed, {"crashed": crashed, "action": int(action)})

    # -- dynamics -----------------------------------------------------------

    def _lane_exists(self, lane: int) -> bool:
        cfg = self.config
        if lane < 0 or lane >= cfg.lane_count:
            return False
        if cfg.kind == "merge" and lane == 0:
            return self.pos[0] < cfg.ramp_end
        return True

    def _apply_action(self, action: Action) -> None:
        cfg = self.config
        self.lateral = 0.0
        if action in (Action.LANE_LEFT, Action.LANE_RIGHT):
            delta = 1 if action == Action.LANE_LEFT else -1
            if self._lane_exists(int(self.lane[0]) + delta):
                self.lane[0] += delta
                self.lateral = delta * cfg.lane_width * cfg.policy_frequency
        elif action == Action.FASTER:
            self.target[0] = min(self.target[0] + cfg.speed_step, cfg.v_max)
        elif action == Action.SLOWER:
            self.target[0] = max(self.target[0] - cfg.speed_step, cfg.ego_min_target)

    def _advance(self, dt: float) -> None:
        cfg = self.config
        pos, speed = self.pos, self.speed
        ahead = pos[None, :] - pos[:, None]
        ahead[(self.lane[None, :] != self.lane[:, None]) | (ahead <= 0.0)] = np.inf
        gap = ahead.min(axis=1) - self.length
        headway = gap / np.maximum(speed, 1e-3)
        brake = np.minimum(np.maximum(1.0 - headway / cfg.time_gap, 0.0), 1.0)
        accel = np.where(headway < cfg.time_gap, -cfg.max_brake * brake, cfg.relax_rate * (self.target - speed))
        ego = cfg.ego_gain * (self.target[0] - speed[0])
        accel[0] = min(max(ego, -cfg.max_brake), cfg.ego_max_accel)
        new_speed = np.minimum(np.maximum(speed + accel * dt, 0.0), cfg.v_max)
        self.pos = pos + 0.5 * (speed + new_speed) * dt
        self.speed = new_speed

    def _ego_collides(self) -> bool:
        cfg = self.config
        if cfg.kind == "merge" and self.lane[0] == 0 and self.pos[0] >= cfg.ramp_end - 0.5 * self.length[0]:
            return True
        near = np.abs(self.pos[1:] - self.pos[0]) < 0.5 * (self.length[1:] + self.length[0])
        return bool((near & (self.lane[1:] == self.lane[0])).any())

    def reward(self, speed: float, lane: int, crashed: bool) -> float:
        cfg = self.config
        frac = min(max((speed - cfg.v_min) / (cfg.v_max - cfg.v_min), 0.0), 1.0)
        return float(cfg.w_speed * frac + cfg.w_right_lane * (lane == cfg.right_lane) + cfg.w_collision * crashed)

    # -- observation --------------------------------------------------------

    def observe(self) -> np.ndarray:
        cfg = self.config
        obs = np.zeros(OBS_SHAPE)
        y_scale = cfg.lane_width * cfg.lane_count
        ego_lane = int(self.lane[0])
        vy = self.lateral / cfg.v_max
        obs[0] = (
            1.0,
            np.clip((self.pos[0] - self.x_ref) / cfg.perception_range, -1.0, 1.0),
            ego_lane * cfg.lane_width / y_scale,
            self.speed[0] / cfg.v_max,
            vy,
        )
        dx = self.pos[1:] - self.pos[0]
        visible = np.flatnonzero(np.abs(dx) <= cfg.perception_range)
        # stable sort on |dx| keeps the lower vehicle id first on ties
        nearest = visible[np.argsort(np.abs(dx[visible]), kind="stable")][:4]
        for row, j in enumerate(nearest, start=1):
            obs[row] = (
                1.0,
                dx[j] / cfg.perception_range,
                (self.lane[j + 1] - ego_lane) * cfg.lane_width / y_scale,
                (self.speed[j + 1] - self.speed[0]) / cfg.v_max,
                -vy,
            )
        return obs

    def vehicles(self) -> list[VehicleState]:
        return [
            VehicleState(int(l), float(p), float(v), float(n), self.config.vehicle_width, float(t))
            for l, p, v, n, t in zip(self.lane, self.pos, self.speed, self.length, self.target)
        ]

    def place(self, vehicles: list[VehicleState]) -> np.ndarray:
        """Replace the traffic state (ego first) and return the new observation."""
        if not self._ready:
            self.reset()
        self.lane = np.array([v.lane for v in vehicles], dtype=np.int64)
        self.pos = np.array([v.position for v in vehicles], dtype=np.float64)
        self.speed = np.array([v.speed for v in vehicles], dtype=np.float64)
        self.target = np.array([v.target_speed or v.speed for v in vehicles], dtype=np.float64)
        self.length = np.array([v.length for v in vehicles], dtype=np.float64)
        self.lateral = 0.0
        self.done = False
        return self.observe()


TRAJECTORY_HEADER = ["episode", "step", "action", "reward", "crashed"] + [
    f"obs_{r}_{c}" for r in range(5) for c in range(5)
]


def write_trajectory_csv(path, rows) -> None:
    """Rows are ``(episode, step, action, reward, crashed, observation)`` tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for episode, step, action, reward, crashed, obs in rows:
            w.writerow([episode, step, int(action), repr(float(reward)), int(bool(crashed))] + [repr(float(v)) for v in np.ravel(obs)])
