"""Torque-limited pendulum swing-up. Angle 0 is upright."""

import math

import numpy as np

from .base import Env
from .waypoint import wrap_angle


class PendulumWorld(Env):
    """Rod pendulum driven by a bounded torque at the pivot.

    Dynamics: ``thdd = 3g/(2l) sin(th) + 3/(m l^2) * torque``, integrated with
    semi-implicit Euler at ``dt`` (velocity first, then angle). Reward is
    ``-(th^2 + 0.1 thd^2 + 0.001 torque^2)`` evaluated at the pre-step state.
    Episodes only end at the horizon.
    """

    name = "pendulum"
    obs_dim = 3
    act_dim = 1

    def __init__(self, gravity=10.0, mass=1.0, length=1.0, max_torque=3.0, max_speed=8.0, dt=0.05, horizon=200):
        super().__init__(horizon)
        self.gravity = float(gravity)
        self.mass = float(mass)
        self.length = float(length)
        self.max_torque = float(max_torque)
        self.max_speed = float(max_speed)
        self.dt = float(dt)
        self.theta = 0.0
        self.theta_dot = 0.0

    @property
    def omega2(self):
        return 1.5 * self.gravity / self.length

    @property
    def torque_gain(self):
        return 3.0 / (self.mass * self.length**2)

    def _reset(self, rng):
        self.theta = float(rng.uniform(-math.pi, math.pi))
        self.theta_dot = float(rng.uniform(-1.0, 1.0))
        return self.observe()

    def set_state(self, theta, theta_dot):
        self.theta = float(wrap_angle(theta))
        self.theta_dot = float(theta_dot)
        self.t = 0
        self.done = False
        return self.observe()

    def observe(self):
        return np.array([math.cos(self.theta), math.sin(self.theta), self.theta_dot])

    def _step(self, action):
        torque = float(action[0]) * self.max_torque
        th, thd = self.theta, self.theta_dot
        reward = -(th * th + 0.1 * thd * thd + 0.001 * torque * torque)
        thdd = self.omega2 * math.sin(th) + self.torque_gain * torque
        thd = float(np.clip(thd + thdd * self.dt, -self.max_speed, self.max_speed))
        th = wrap_angle(th + thd * self.dt)
        # keep the range (-pi, pi]
        if th == -math.pi:
            th = math.pi
        self.theta, self.theta_dot = th, thd
        return self.observe(), reward, False

    def trace_point(self):
        return np.array([self.theta, self.theta_dot])

    def energy(self):
        """Mechanical energy per unit inertia; equals ``omega2`` at upright rest."""
        return 0.5 * self.theta_dot**2 + self.omega2 * math.cos(self.theta)

    def expert_action(self, kp=4.0, kd=1.0, capture_angle=0.6):
        """Energy pumping until the rod can reach the top, PD balancing near it."""
        th, thd = self.theta, self.theta_dot
        if abs(th) < capture_angle:
            u = -(kp * th + kd * thd)
        elif self.energy() < self.omega2:
            # dE/dt = torque_gain * torque * thd, so push along the velocity
            u = 1.0 if thd >= 0.0 else -1.0
        else:
            u = 0.0
        return np.array([float(np.clip(u, -1.0, 1.0))])
