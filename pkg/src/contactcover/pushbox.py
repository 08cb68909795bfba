"""Vectorized 2D push-box testbed.

A point ball (the single "finger") lives in the unit workspace and
pushes a square box that slides along a wall near the top edge. Each
episode the box starts at the left or right end of the wall and the
task is to push it to the center, so the side the ball must press
depends on the initialization. The env computes only the task reward;
contact bookkeeping and exploration rewards happen outside, fed by the
per-step info arrays.

Quasi-static physics: the ball's commanded displacement is capped, the
ball is clamped to the workspace, and any overlap with the (ball-radius
expanded) box is resolved along the smallest-penetration face. Side
penetrations translate the box along the wall; the force proxy is
stiffness x penetration depth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, seeding
from .geometry import Pose, RegionMap, cluster_regions, sample_surface_points

Array = np.ndarray

LEFT = 0
RIGHT = 1


@dataclass(frozen=True)
class EnvParams:
    """Physics and episode constants; defaults define the testbed."""

    step_cap: float = 0.02        # max displacement per step
    ball_radius: float = 0.02
    wall_y: float = 0.95          # the box slides along this line
    box_size: float = 0.1
    horizon: int = 150
    stiffness: float = 10.0       # force proxy per meter of penetration
    success_radius: float = 0.03
    goal_x: float = 0.5
    init_left_x: float = 0.15
    init_right_x: float = 0.85
    spawn_y_max: float = 0.5      # ball spawns in the lower workspace
    contact_dist: float = 0.03    # match distance gate for contact
    contact_force: float = 0.01   # force gate for contact

    @property
    def box_half(self) -> float:
        return self.box_size / 2.0

    @property
    def box_center_y(self) -> float:
        return self.wall_y - self.box_half

    @property
    def ball_xmin(self) -> float:
        return self.ball_radius

    @property
    def ball_xmax(self) -> float:
        return 1.0 - self.ball_radius

    @property
    def ball_ymin(self) -> float:
        return self.ball_radius

    @property
    def ball_ymax(self) -> float:
        return self.wall_y - self.ball_radius

    @property
    def box_xmin(self) -> float:
        return self.box_half

    @property
    def box_xmax(self) -> float:
        return 1.0 - self.box_half


def canonical_surface(params: EnvParams):
    """16 perimeter midpoints of the box, centered at the origin."""
    return sample_surface_points((params.box_size, params.box_size), 16,
                                 seed=0, jitter=0.0)


def surface_regions(params: EnvParams, k: int = 4, seed: int = 0) -> RegionMap:
    """Canonical perimeter regions; one region per side at k=4."""
    return cluster_regions(canonical_surface(params), k, normal_weight=0.5,
                           seed=seed)


class PushBoxVecEnv:
    """N independent push-box instances stepped in lockstep.

    Each instance owns a Generator derived from (root_seed, stream, i),
    so a batch is bitwise identical to N scalar envs built with the same
    per-instance seeds. With autoreset (the default), finished instances
    restart within the same step() call and the returned observation is
    the new episode's first; the info dict always describes the
    pre-reset transition. With autoreset=False, stepping a finished
    instance raises.
    """

    OBS_DIM = 7  # ball (2), box_x, goal_x, previous action (2), contact flag

    def __init__(self, n_envs: int, root_seed: int = 0,
                 params: EnvParams | None = None, autoreset: bool = True,
                 forced_side=None, stream: int = seeding.STREAM_ENV,
                 seeds=None):
        if n_envs < 1:
            raise ValueError("n_envs must be >= 1")
        self.n_envs = int(n_envs)
        self.params = params if params is not None else EnvParams()
        self.autoreset = bool(autoreset)
        self.stream = int(stream)
        if forced_side is not None:
            forced_side = np.asarray(forced_side, dtype=np.int64)
            if forced_side.shape != (self.n_envs,):
                raise ValueError("forced_side must have one entry per env")
            if not np.isin(forced_side, (LEFT, RIGHT)).all():
                raise ValueError("forced_side entries must be LEFT or RIGHT")
        self.forced_side = forced_side

        self.surface_points = canonical_surface(self.params)
        self.region_map = surface_regions(self.params)

        self.ball = np.zeros((self.n_envs, 2))
        self.box_x = np.zeros(self.n_envs)
        self.init_side = np.zeros(self.n_envs, dtype=np.int64)
        self.step_index = np.zeros(self.n_envs, dtype=np.int64)
        self.done_flags = np.zeros(self.n_envs, dtype=bool)
        self.prev_action = np.zeros((self.n_envs, 2))
        self.contact_flag = np.zeros(self.n_envs)
        self._applied = np.zeros((self.n_envs, 2))
        self._force = np.zeros(self.n_envs)

        if seeds is not None:
            if len(seeds) != self.n_envs:
                raise ValueError("seeds must have one entry per env")
            self.env_seeds = [int(s) for s in seeds]
        else:
            self.env_seeds = [seeding.seed_int(root_seed, self.stream, i)
                              for i in range(self.n_envs)]
        self._rngs = [np.random.default_rng(s) for s in self.env_seeds]
        self.reset()

    # ------------------------------------------------------------------
    # episode control

    def reset(self, seed: int | None = None) -> Array:
        """Start fresh episodes in every instance; optional reseed."""
        if seed is not None:
            self.env_seeds = [seeding.seed_int(seed, self.stream, i)
                              for i in range(self.n_envs)]
            self._rngs = [np.random.default_rng(s) for s in self.env_seeds]
        for i in range(self.n_envs):
            self._reset_one(i)
        return self._observe()

    def _reset_one(self, i: int):
        p = self.params
        gen = self._rngs[i]
        side = int(gen.integers(2))  # drawn even when overridden, to keep
        if self.forced_side is not None:  # spawn streams aligned
            side = int(self.forced_side[i])
        self.init_side[i] = side
        self.box_x[i] = p.init_left_x if side == LEFT else p.init_right_x
        self.ball[i, 0] = gen.uniform(p.ball_xmin, p.ball_xmax)
        self.ball[i, 1] = gen.uniform(p.ball_ymin, p.spawn_y_max)
        self.step_index[i] = 0
        self.done_flags[i] = False
        self.prev_action[i] = 0.0
        self.contact_flag[i] = 0.0

    def step(self, actions):
        """Advance every instance one step.

        Returns (obs, task_reward, done, info); info holds the
        pre-reset transition arrays (copies, safe to keep).
        """
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n_envs, 2):
            raise ValueError(f"actions must have shape ({self.n_envs}, 2)")
        if not np.isfinite(actions).all():
            raise ValueError("actions must be finite")
        if self.done_flags.any():
            raise RuntimeError("step() called on a finished instance; "
                               "reset() it first")

        p = self.params
        prev_box = self.box_x.copy()
        kernels.pushbox_step(self.ball, self.box_x, actions,
                             self._applied, self._force,
                             p.step_cap, p.ball_radius,
                             p.ball_xmin, p.ball_xmax,
                             p.ball_ymin, p.ball_ymax,
                             p.box_half, p.box_center_y, p.box_half,
                             p.box_xmin, p.box_xmax, p.stiffness)
        self.step_index += 1

        success = np.abs(self.box_x - p.goal_x) < p.success_radius
        done = success | (self.step_index >= p.horizon)
        reward = self.task_reward(prev_box, self.box_x, p.goal_x, success)
        self._assert_bounds()

        info = {
            "ball": self.ball.copy(),
            "box_x": self.box_x.copy(),
            "prev_box_x": prev_box,
            "force": self._force.copy(),
            "applied": self._applied.copy(),
            "success": success.copy(),
            "init_side": self.init_side.copy(),
            "step_index": self.step_index.copy(),
            "reset": done.copy() if self.autoreset else np.zeros_like(done),
        }

        self.prev_action[:] = self._applied
        self.contact_flag[:] = (self._force > p.contact_force).astype(np.float64)
        if self.autoreset:
            for i in np.nonzero(done)[0]:
                self._reset_one(i)
        else:
            self.done_flags |= done
        return self._observe(), reward, done, info

    def _observe(self) -> Array:
        obs = np.empty((self.n_envs, self.OBS_DIM))
        obs[:, 0:2] = self.ball
        obs[:, 2] = self.box_x
        obs[:, 3] = self.params.goal_x
        obs[:, 4:6] = self.prev_action
        obs[:, 6] = self.contact_flag
        return obs

    def _assert_bounds(self):
        p = self.params
        ok = ((self.ball[:, 0] >= p.ball_xmin) & (self.ball[:, 0] <= p.ball_xmax)
              & (self.ball[:, 1] >= p.ball_ymin) & (self.ball[:, 1] <= p.ball_ymax)
              & (self.box_x >= p.box_xmin) & (self.box_x <= p.box_xmax))
        if not ok.all():
            bad = int(np.nonzero(~ok)[0][0])
            raise RuntimeError(
                f"instance {bad} left its bounds: ball={self.ball[bad]}, "
                f"box_x={self.box_x[bad]}")

    # ------------------------------------------------------------------
    # rewards and object state

    @staticmethod
    def task_reward(prev_box_x, next_box_x, goal_x: float, success):
        """Dense progress toward the goal plus a terminal bonus.

        10 x the reduction in |box_x - goal_x|, plus 10 on success.
        Works on scalars or arrays.
        """
        shaping = 10.0 * (np.abs(prev_box_x - goal_x) - np.abs(next_box_x - goal_x))
        return shaping + 10.0 * np.asarray(success, dtype=np.float64)

    def object_surface(self):
        """(canonical points, per-instance current Pose, goal Pose, regions)."""
        cy = self.params.box_center_y
        current = [Pose.planar(0.0, [float(x), cy]) for x in self.box_x]
        goal = Pose.planar(0.0, [self.params.goal_x, cy])
        return self.surface_points, current, goal, self.region_map

    def current_translations(self) -> Array:
        """(N, 2) box-center translations for batched object states."""
        out = np.empty((self.n_envs, 2))
        out[:, 0] = self.box_x
        out[:, 1] = self.params.box_center_y
        return out

    def goal_translation(self) -> Array:
        return np.array([self.params.goal_x, self.params.box_center_y])


def scripted_push_action(ball_xy, box_x: float, init_side: int,
                         params: EnvParams) -> Array:
    """Memoryless hand policy that solves one instance.

    Travels at spawn height to a staging column just outside the box's
    outer face, climbs to push height, then shoves the box toward the
    goal. Used by tests as a reachability oracle and by the demo replay.
    """
    p = params
    cap = p.step_cap
    clearance = p.box_half + p.ball_radius + 0.03
    if init_side == LEFT:
        stage_x = box_x - clearance
        push = np.array([cap, 0.0])
    else:
        stage_x = box_x + clearance
        push = np.array([-cap, 0.0])
    x, y = float(ball_xy[0]), float(ball_xy[1])
    if y < 0.86:
        if abs(x - stage_x) > 1e-9:
            return np.array([np.clip(stage_x - x, -cap, cap), 0.0])
        return np.array([0.0, cap])
    return push
