"""Scripted route expert: pure pursuit along map waypoints with an
obstacle-aware speed governor.

Stands in for the human demonstrator and for the on-policy labeler. It reads
world geometry directly (no rendered sensors), so it is cheap and exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .policies import BasePolicy
from .world import (
    Action,
    ROBOT_RADIUS,
    RobotState,
    V_MAX,
    W_MAX,
    WorldMap,
    cast_rays,
    wrap_angle,
)

GUARD_ANGLES = (-0.35, 0.0, 0.35)   # rad, forward obstacle fan


@dataclass(frozen=True)
class OracleConfig:
    lookahead: float = 0.8      # m along the route
    cruise: float = 0.7         # normalized forward speed
    slow_radius: float = 1.2    # m, obstacle distance where slowdown starts
    slow_factor: float = 0.2    # floor of the speed scale
    stop_dist: float = 0.35     # m, forward guard: rotate in place below this
    loop: bool = False          # closed route (ring) vs open (stop at end)

    def __post_init__(self):
        if self.lookahead <= ROBOT_RADIUS:
            raise ValueError("lookahead must exceed the robot radius")
        if not 0.0 < self.cruise <= 1.0:
            raise ValueError("cruise must be in (0, 1]")
        if not 0.0 < self.stop_dist < self.slow_radius:
            raise ValueError("need 0 < stop_dist < slow_radius")


class RouteExpert(BasePolicy):
    def __init__(self, route, cfg: OracleConfig = OracleConfig()):
        if len(route) < 2:
            raise ValueError("route needs at least two waypoints")
        self.cfg = cfg
        pts = list(route)
        if cfg.loop:
            pts = pts + [pts[0]]
        self.pts = pts
        self.seg_len = [math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
        self.cum = [0.0]
        for L in self.seg_len:
            self.cum.append(self.cum[-1] + L)
        self.perimeter = self.cum[-1]

    # ------------------------------------------------------------------
    def nearest_arc(self, x: float, y: float) -> float:
        """Arc-length coordinate of the closest polyline point."""
        best_d2 = math.inf
        best_s = 0.0
        for i in range(len(self.seg_len)):
            ax, ay = self.pts[i]
            bx, by = self.pts[i + 1]
            dx, dy = bx - ax, by - ay
            L2 = dx * dx + dy * dy
            if L2 == 0:
                t = 0.0
            else:
                t = min(1.0, max(0.0, ((x - ax) * dx + (y - ay) * dy) / L2))
            px, py = ax + t * dx, ay + t * dy
            d2 = (x - px) ** 2 + (y - py) ** 2
            if d2 < best_d2:
                best_d2 = d2
                best_s = self.cum[i] + t * self.seg_len[i]
        return best_s

    def point_at(self, s: float) -> tuple[float, float]:
        if self.cfg.loop:
            s = s % self.perimeter
        else:
            s = min(max(s, 0.0), self.perimeter)
        for i in range(len(self.seg_len)):
            if s <= self.cum[i + 1] or i == len(self.seg_len) - 1:
                L = self.seg_len[i]
                t = 0.0 if L == 0 else (s - self.cum[i]) / L
                ax, ay = self.pts[i]
                bx, by = self.pts[i + 1]
                return ax + t * (bx - ax), ay + t * (by - ay)
        return self.pts[-1]

    # ------------------------------------------------------------------
    def act(self, world: WorldMap, state: RobotState, obs, rng) -> Action:
        cfg = self.cfg
        s = self.nearest_arc(state.x, state.y)
        if not cfg.loop and s >= self.perimeter - 1e-9:
            return Action(0.0, 0.0)
        tx, ty = self.point_at(s + cfg.lookahead)
        alpha = wrap_angle(math.atan2(ty - state.y, tx - state.x) - state.heading)

        angles = state.heading + np.array(GUARD_ANGLES)
        hits = cast_rays(world, state.x, state.y, angles, cfg.slow_radius * 3)
        dmin = min(h.dist for h in hits)

        if dmin < cfg.stop_dist:
            # blocked: rotate in place toward the pursuit point
            return Action(0.0, 0.6 if alpha >= 0 else -0.6)

        scale = (dmin - cfg.stop_dist) / max(cfg.slow_radius - cfg.stop_dist, 1e-9)
        scale = min(1.0, max(cfg.slow_factor, scale))
        # facing away from the target: turn before committing speed
        if abs(alpha) > 1.2:
            scale = min(scale, cfg.slow_factor)
        v_norm = cfg.cruise * scale
        kappa = 2.0 * math.sin(alpha) / cfg.lookahead
        w_norm = (v_norm * V_MAX) * kappa / W_MAX
        if abs(alpha) > 1.2:
            w_norm = 0.5 if alpha >= 0 else -0.5
        return Action(v_norm, w_norm)


def forward_expert(world: WorldMap, loop: bool, cfg: OracleConfig = None) -> RouteExpert:
    base = cfg or OracleConfig()
    return RouteExpert(world.route, OracleConfig(
        lookahead=base.lookahead, cruise=base.cruise, slow_radius=base.slow_radius,
        slow_factor=base.slow_factor, stop_dist=base.stop_dist, loop=loop))


def reverse_expert(world: WorldMap, loop: bool, cfg: OracleConfig = None) -> RouteExpert:
    base = cfg or OracleConfig()
    return RouteExpert(tuple(reversed(world.route)), OracleConfig(
        lookahead=base.lookahead, cruise=base.cruise, slow_radius=base.slow_radius,
        slow_factor=base.slow_factor, stop_dist=base.stop_dist, loop=loop))
