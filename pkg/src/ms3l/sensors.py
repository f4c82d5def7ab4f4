"""Simulated sensors: depth camera, ultrasonic pair, RGB camera.

All sensors share one geometric model: horizontal DDA rays fan out over the
field of view, and vertical structure comes from a cylindrical projection
against wall height WALL_HEIGHT with the optics at CAMERA_HEIGHT above the
floor. Angles grow toward image-left, so column 0 is the leftmost column and
positive angular velocity turns toward image-left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .world import FURNITURE, WALL, RobotState, WorldMap, cast_rays

DEPTH_W, DEPTH_H = 48, 27
DEPTH_FOV = math.radians(90.0)
DEPTH_MIN, DEPTH_MAX = 0.5, 20.0
DEPTH_NOISE = 0.05          # multiplicative sigma
DEPTH_SENTINEL = 0.0        # invalid-pixel marker
UNTEXTURED_INCIDENCE = math.radians(15.0)  # near-perpendicular wall dropout
UNTEXTURED_PIXEL_P = 0.5

WALL_HEIGHT = 2.5
CAMERA_HEIGHT = 0.3
PED_HEIGHT = 1.7

US_MOUNT = math.radians(30.0)   # symmetric pair at +/- mount angle
US_CONE = math.radians(7.5)     # half-angle of the 5-ray cone
US_RAYS = 5
US_MIN, US_MAX = 0.05, 4.0
US_NOISE = 0.02                 # additive sigma, meters

IMAGE_SIZE = 64
IMAGE_FOV = math.radians(90.0)


@dataclass(frozen=True)
class SensorNoise:
    """Declared noise model for the simulated sensors."""

    depth_sigma: float = DEPTH_NOISE
    us_sigma: float = US_NOISE
    dropout_p: float = UNTEXTURED_PIXEL_P

_MAT_COLOR = {
    WALL: (120, 120, 130),
    FURNITURE: (150, 100, 60),
    -1: (60, 80, 200),          # pedestrian
}
_FLOOR = np.array((70, 64, 58), dtype=np.float64)
_CEIL = np.array((40, 42, 46), dtype=np.float64)


@dataclass
class DepthMap:
    """H x W float32 ranges in meters; DEPTH_SENTINEL marks invalid pixels."""

    values: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return self.values != DEPTH_SENTINEL


def _column_angles(heading: float, n: int, fov: float) -> np.ndarray:
    # column 0 = left edge of the image = largest bearing
    offsets = (0.5 - (np.arange(n) + 0.5) / n) * fov
    return heading + offsets


def _row_angles(n: int, fov_v: float) -> np.ndarray:
    return (0.5 - (np.arange(n) + 0.5) / n) * fov_v


def _column_hits(world: WorldMap, x: float, y: float, heading: float,
                 n_cols: int, fov: float, max_dist: float):
    """Per column: nearest solid hit plus the nearest grid-only hit.

    Keeping the two separately lets tall geometry (walls) show above a
    shorter pedestrian in the same column.
    """
    angles = _column_angles(heading, n_cols, fov)
    merged = cast_rays(world, x, y, angles, max_dist, include_pedestrians=True)
    if world.pedestrians:
        grid_only = cast_rays(world, x, y, angles, max_dist, include_pedestrians=False)
    else:
        grid_only = merged
    return angles, merged, grid_only


def render_depth(world: WorldMap, state: RobotState,
                 rng: np.random.Generator,
                 width: int = DEPTH_W, height: int = DEPTH_H,
                 noise_sigma: float = DEPTH_NOISE,
                 dropout_p: float = UNTEXTURED_PIXEL_P) -> DepthMap:
    """Render the noisy depth image for the given pose."""
    fov_v = 2.0 * math.atan(math.tan(DEPTH_FOV / 2.0) * height / width)
    _, merged, grid_only = _column_hits(
        world, state.x, state.y, state.heading, width, DEPTH_FOV,
        max_dist=DEPTH_MAX * 1.5)

    phi = _row_angles(height, fov_v)[:, None]          # (H,1), +up
    sin_phi = np.sin(phi)
    cos_phi = np.cos(phi)

    d_wall = np.array([h.dist if h.material != -1 else g.dist
                       for h, g in zip(merged, grid_only)])[None, :]
    d_ped = np.array([h.dist if h.material == -1 else np.inf
                      for h in merged])[None, :]

    with np.errstate(divide="ignore", invalid="ignore"):
        floor_rng = np.where(sin_phi < 0, CAMERA_HEIGHT / np.maximum(-sin_phi, 1e-12), np.inf)
        ceil_rng = np.where(sin_phi > 0,
                            (WALL_HEIGHT - CAMERA_HEIGHT) / np.maximum(sin_phi, 1e-12), np.inf)
        wall_rng = d_wall / cos_phi
        ped_rng = d_ped / cos_phi

    tan_phi = np.tan(phi)
    wall_band = np.isfinite(d_wall) & (tan_phi >= -CAMERA_HEIGHT / d_wall) & \
        (tan_phi <= (WALL_HEIGHT - CAMERA_HEIGHT) / d_wall)
    ped_band = np.isfinite(d_ped) & (tan_phi >= -CAMERA_HEIGHT / d_ped) & \
        (tan_phi <= (PED_HEIGHT - CAMERA_HEIGHT) / d_ped)

    ranges = np.where(sin_phi < 0, floor_rng, ceil_rng)
    ranges = np.where(wall_band, wall_rng, ranges)
    ranges = np.where(ped_band, ped_rng, ranges)       # peds sit in front

    ranges = ranges * (1.0 + noise_sigma * rng.standard_normal(ranges.shape))
    values = np.where((ranges >= DEPTH_MIN) & (ranges <= DEPTH_MAX),
                      ranges, DEPTH_SENTINEL).astype(np.float32)

    # near-perpendicular wall columns lose texture and drop out pixel-wise
    col_angles = _column_angles(state.heading, width, DEPTH_FOV)
    for c, hit in enumerate(merged):
        if hit.material != WALL or not math.isfinite(hit.dist):
            continue
        comp = math.cos(col_angles[c]) if hit.side == 0 else math.sin(col_angles[c])
        if abs(comp) < math.cos(UNTEXTURED_INCIDENCE):
            continue
        corrupt = rng.random(height) < dropout_p
        kind = rng.random(height) < 0.5
        col = values[:, c]
        col[corrupt & kind] = DEPTH_SENTINEL
        col[corrupt & ~kind] = rng.uniform(12.0, DEPTH_MAX, size=int((corrupt & ~kind).sum()))
        values[:, c] = col
    return DepthMap(values=values)


def read_ultrasonic(world: WorldMap, state: RobotState,
                    rng: np.random.Generator,
                    noise_sigma: float = US_NOISE) -> tuple[float, float]:
    """(left, right) ranges in meters, clamped to the sensor envelope."""
    out = []
    for mount in (US_MOUNT, -US_MOUNT):
        angles = state.heading + mount + np.linspace(-US_CONE, US_CONE, US_RAYS)
        hits = cast_rays(world, state.x, state.y, angles, US_MAX * 3)
        d = min(h.dist for h in hits)
        d = d + noise_sigma * rng.standard_normal()
        out.append(float(min(US_MAX, max(US_MIN, d))))
    return out[0], out[1]


def _hash_shade(r: int, c: int, band: int) -> float:
    h = (r * 73856093) ^ (c * 19349663) ^ (band * 83492791)
    h = (h ^ (h >> 13)) & 0xFF
    return (h / 255.0 - 0.5) * 0.22


def render_image(world: WorldMap, state: RobotState,
                 size: int = IMAGE_SIZE) -> np.ndarray:
    """Deterministic (size, size, 3) uint8 first-person view.

    Column raycast against the grid, strip height from the cylindrical
    projection, per-cell hashed shading so different wall segments are
    visually distinguishable.
    """
    fov_v = IMAGE_FOV * 1.0
    _, merged, grid_only = _column_hits(
        world, state.x, state.y, state.heading, size, IMAGE_FOV, max_dist=40.0)
    phi = _row_angles(size, fov_v)
    img = np.empty((size, size, 3), dtype=np.float64)

    # floor / ceiling background with distance shading
    below = phi < 0
    floor_d = np.where(below, CAMERA_HEIGHT / np.maximum(np.tan(-phi), 1e-9), 0.0)
    ceil_d = np.where(~below, (WALL_HEIGHT - CAMERA_HEIGHT) /
                      np.maximum(np.tan(np.maximum(phi, 1e-9)), 1e-9), 0.0)
    shade_f = 1.0 / (1.0 + 0.12 * floor_d)
    shade_c = 1.0 / (1.0 + 0.12 * ceil_d)
    img[below] = (_FLOOR[None, :] * shade_f[below, None])[:, None, :]
    img[~below] = (_CEIL[None, :] * shade_c[~below, None])[:, None, :]

    tan_phi = np.tan(phi)
    for c, (hit, ghit) in enumerate(zip(merged, grid_only)):
        layers = []
        if math.isfinite(ghit.dist):
            layers.append(ghit)
        if hit.material == -1 and math.isfinite(hit.dist):
            layers.append(hit)  # ped drawn after (in front of) the wall
        for lay in layers:
            d = lay.dist
            top_h = (PED_HEIGHT if lay.material == -1 else WALL_HEIGHT) - CAMERA_HEIGHT
            band = (tan_phi >= -CAMERA_HEIGHT / d) & (tan_phi <= top_h / d)
            base = np.array(_MAT_COLOR[lay.material], dtype=np.float64)
            shade = 1.0 / (1.0 + 0.12 * d)
            if lay.material == -1:
                tex = 1.0
            else:
                tex = 1.0 + _hash_shade(lay.cell[0], lay.cell[1], int(lay.u * 8)) \
                    + (0.08 if lay.side == 1 else 0.0)
            img[band, c] = base * shade * tex
    return np.clip(img, 0, 255).astype(np.uint8)


def image_to_input(img: np.ndarray) -> np.ndarray:
    """uint8 HWC image -> float32 CHW in [0,1], the network's input layout."""
    return (img.astype(np.float32) / 255.0).transpose(2, 0, 1)
