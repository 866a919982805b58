"""2-D waypoint navigation among circular obstacles, observed through lidar."""

import math

import numpy as np

from ..errors import ConfigurationError
from ..kernels import lidar_scan, segment_circle_hit
from .base import Env


def wrap_angle(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


class WaypointWorld(Env):
    """Unicycle agent that must reach a goal through a random obstacle field.

    Action is ``(heading_rate, throttle)`` in [-1, 1]^2. Positive heading rate
    turns counter-clockwise (left). Speed is ``max_speed * (throttle + 1) / 2``,
    so throttle -1 is a full stop.

    Observation (length ``n_beams + 5``): lidar ranges / ``lidar_range``, goal
    vector in the agent frame / ``size``, speed / ``max_speed``, sin and cos of
    the heading.
    """

    name = "waypoint"
    act_dim = 2

    def __init__(
        self,
        size=20.0,
        n_beams=16,
        lidar_range=10.0,
        max_speed=0.5,
        max_turn=0.3,
        n_obstacles=8,
        radius_range=(0.5, 1.5),
        agent_radius=0.2,
        goal_radius=0.5,
        k_progress=1.0,
        time_penalty=0.01,
        goal_bonus=10.0,
        collision_penalty=10.0,
        min_goal_distance=14.0,
        obstacle_gap=1.0,
        expert_clearance=0.5,
        horizon=300,
        max_placement_tries=2000,
    ):
        super().__init__(horizon)
        self.size = float(size)
        self.n_beams = int(n_beams)
        self.lidar_range = float(lidar_range)
        self.max_speed = float(max_speed)
        self.max_turn = float(max_turn)
        self.n_obstacles = int(n_obstacles)
        self.radius_range = (float(radius_range[0]), float(radius_range[1]))
        self.agent_radius = float(agent_radius)
        self.goal_radius = float(goal_radius)
        self.k_progress = float(k_progress)
        self.time_penalty = float(time_penalty)
        self.goal_bonus = float(goal_bonus)
        self.collision_penalty = float(collision_penalty)
        self.min_goal_distance = float(min_goal_distance)
        self.obstacle_gap = float(obstacle_gap)
        self.expert_clearance = float(expert_clearance)
        self.max_placement_tries = int(max_placement_tries)
        self.obs_dim = self.n_beams + 5

        self.pos = np.zeros(2)
        self.heading = 0.0
        self.speed = 0.0
        self.goal = np.zeros(2)
        self.centers = np.zeros((0, 2))
        self.radii = np.zeros(0)

    # -- episode setup ----------------------------------------------------

    def _reset(self, rng):
        margin = 2.0
        lo, hi = margin, self.size - margin
        for _ in range(self.max_placement_tries):
            pos = rng.uniform(lo, hi, 2)
            goal = rng.uniform(lo, hi, 2)
            if np.hypot(*(goal - pos)) >= self.min_goal_distance:
                break
        else:
            raise ConfigurationError("could not place start and goal far enough apart")

        centers, radii = [], []
        tries = 0
        while len(centers) < self.n_obstacles:
            tries += 1
            if tries > self.max_placement_tries:
                raise ConfigurationError(
                    f"could not place {self.n_obstacles} obstacles after {self.max_placement_tries} tries; field too dense"
                )
            c = rng.uniform(0.0, self.size, 2)
            r = rng.uniform(*self.radius_range)
            if np.hypot(*(c - pos)) < r + self.agent_radius + 1.0:
                continue
            if np.hypot(*(c - goal)) < r + self.goal_radius + 1.0:
                continue
            if any(np.hypot(*(c - c2)) < r + r2 + self.obstacle_gap for c2, r2 in zip(centers, radii)):
                continue
            centers.append(c)
            radii.append(r)

        self.pos = pos
        self.goal = goal
        self.heading = float(rng.uniform(-math.pi, math.pi))
        self.speed = 0.0
        self.centers = np.array(centers, dtype=np.float64).reshape(-1, 2)
        self.radii = np.array(radii, dtype=np.float64)
        return self.observe()

    def set_state(self, pos, heading, goal, centers=(), radii=(), speed=0.0):
        """Place the agent directly (for tests and scripted scenarios)."""
        self.pos = np.array(pos, dtype=np.float64)
        self.heading = float(heading)
        self.goal = np.array(goal, dtype=np.float64)
        self.centers = np.array(centers, dtype=np.float64).reshape(-1, 2)
        self.radii = np.array(radii, dtype=np.float64).reshape(-1)
        self.speed = float(speed)
        self.t = 0
        self.done = False
        return self.observe()

    # -- dynamics ---------------------------------------------------------

    def lidar(self):
        return lidar_scan(self.pos[0], self.pos[1], self.heading, self.centers, self.radii, self.n_beams, self.lidar_range)

    def observe(self):
        rel = self.goal - self.pos
        c, s = math.cos(self.heading), math.sin(self.heading)
        goal_local = np.array([c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1]]) / self.size
        return np.concatenate(
            [
                self.lidar() / self.lidar_range,
                goal_local,
                [self.speed / self.max_speed, s, c],
            ]
        )

    def _step(self, action):
        prev_dist = float(np.hypot(*(self.goal - self.pos)))
        self.heading = wrap_angle(self.heading + action[0] * self.max_turn)
        self.speed = self.max_speed * (action[1] + 1.0) / 2.0
        old = self.pos
        new = old + self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])
        self.pos = new
        new_dist = float(np.hypot(*(self.goal - new)))

        reward = (prev_dist - new_dist) * self.k_progress - self.time_penalty
        terminal = False
        if segment_circle_hit(old[0], old[1], new[0], new[1], self.centers, self.radii, self.agent_radius):
            reward -= self.collision_penalty
            terminal = True
        elif new_dist < self.goal_radius:
            reward += self.goal_bonus
            terminal = True
        return self.observe(), reward, terminal

    def trace_point(self):
        return self.pos.copy()

    # -- scripted expert --------------------------------------------------

    def _blocking_obstacle(self):
        """Nearest obstacle whose inflated disc intersects the straight path to the goal."""
        seg = self.goal - self.pos
        L2 = float(seg @ seg)
        best, best_t = None, np.inf
        for m in range(self.radii.shape[0]):
            rel = self.centers[m] - self.pos
            t = float(np.clip(rel @ seg / L2, 0.0, 1.0)) if L2 > 0 else 0.0
            closest = self.pos + t * seg
            inflated = self.radii[m] + self.agent_radius + self.expert_clearance
            if np.hypot(*(self.centers[m] - closest)) < inflated and t < best_t:
                best, best_t = m, t
        return best

    def expert_action(self):
        """Reactive tangent-following expert.

        Heads straight for the goal when the path is clear; otherwise steers
        along the tangent of the blocking obstacle's clearance circle on the
        side closer to the goal, slowing down when close to it.
        """
        rel = self.goal - self.pos
        goal_angle = math.atan2(rel[1], rel[0])
        target = goal_angle
        throttle = 1.0
        m = self._blocking_obstacle()
        if m is not None:
            to_c = self.centers[m] - self.pos
            d = float(np.hypot(*to_c))
            inflated = self.radii[m] + self.agent_radius + self.expert_clearance
            c_angle = math.atan2(to_c[1], to_c[0])
            if d > inflated:
                off = math.asin(inflated / d)
            else:
                # inside the clearance ring: move tangentially and slightly outward
                off = 0.5 * math.pi + 0.3
            left, right = c_angle + off, c_angle - off
            target = left if abs(wrap_angle(left - goal_angle)) <= abs(wrap_angle(right - goal_angle)) else right
            if d - self.radii[m] < 2.0:
                throttle = 0.0
        bearing = wrap_angle(target - self.heading)
        heading_rate = float(np.clip(bearing / self.max_turn, -1.0, 1.0))
        if abs(bearing) > 0.5 * math.pi:
            throttle = -1.0
        return np.array([heading_rate, throttle])
