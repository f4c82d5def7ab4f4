"""2D indoor world: occupancy grid, differential-drive kinematics, pedestrians.

Grid convention: cell (row, col) covers x in [col*cs, (col+1)*cs) and
y in [row*cs, (row+1)*cs). Headings are radians in [-pi, pi), measured
counter-clockwise from +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

V_MAX = 0.5     # m/s, drive base linear envelope
W_MAX = 4.5     # rad/s, drive base angular envelope
ROBOT_RADIUS = 0.17  # m, disc model of the base
COLLISION_SUBSTEPS = 5

FREE, WALL, FURNITURE = 0, 1, 2

MAP_MAGIC = "MS3L-MAP v1"


class MapParseError(ValueError):
    def __init__(self, message: str, line: int, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class MapValidationError(ValueError):
    """Raised when a parsed map violates an invariant."""


class ContractViolation(RuntimeError):
    """A caller broke an operation precondition (e.g. stepping a collided state)."""


def wrap_angle(theta: float) -> float:
    """Wrap into [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class Action:
    """Normalized drive command; both components clamped to [-1, 1]."""

    v_norm: float
    w_norm: float

    def __post_init__(self):
        object.__setattr__(self, "v_norm", min(1.0, max(-1.0, float(self.v_norm))))
        object.__setattr__(self, "w_norm", min(1.0, max(-1.0, float(self.w_norm))))


def denormalize(a: Action) -> tuple[float, float]:
    """Map normalized command to (v m/s, w rad/s)."""
    return V_MAX * a.v_norm, W_MAX * a.w_norm


@dataclass(frozen=True)
class Pedestrian:
    path: tuple[tuple[float, float], ...]  # world-coordinate waypoints, cycled
    speed: float          # m/s
    radius: float         # m
    pos: tuple[float, float]
    target: int           # index into path of the waypoint being approached

    def __post_init__(self):
        if self.speed < 0:
            raise MapValidationError("pedestrian speed must be >= 0")
        if self.radius <= 0:
            raise MapValidationError("pedestrian radius must be > 0")


@dataclass(frozen=True)
class WorldMap:
    grid: np.ndarray                 # int8, FREE/WALL/FURNITURE
    cell_size: float                 # meters per cell
    spawn: tuple[float, float, float]  # x, y, heading
    route: tuple[tuple[float, float], ...]
    pedestrians: tuple[Pedestrian, ...] = ()
    name: str = ""

    @property
    def rows(self) -> int:
        return self.grid.shape[0]

    @property
    def cols(self) -> int:
        return self.grid.shape[1]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(y // self.cell_size), int(x // self.cell_size)

    def occupied(self, row: int, col: int) -> bool:
        # Anything off the grid counts as solid.
        if row < 0 or col < 0 or row >= self.rows or col >= self.cols:
            return True
        return self.grid[row, col] != FREE


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    heading: float  # kept in [-pi, pi)
    last_action: Action = Action(0.0, 0.0)
    collided: bool = False
    t: float = 0.0

    @property
    def pose(self) -> tuple[float, float, float]:
        return self.x, self.y, self.heading


def spawn_state(world: WorldMap) -> RobotState:
    x, y, th = world.spawn
    return RobotState(x=x, y=y, heading=wrap_angle(th))


# ---------------------------------------------------------------------------
# map loading

def _parse_grid_line(text: str, lineno: int) -> list[tuple[str, int]]:
    """Tokenize one grid row into (token, waypoint_index_or_-1) cells.

    'W' consumes the digits that follow it, so waypoint cells are wider
    than one character in the source text; the cell's column is its token
    position, not its character offset.
    """
    cells = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "#.FS":
            cells.append((ch, -1))
            i += 1
        elif ch == "W":
            j = i + 1
            while j < len(text) and text[j].isdigit():
                j += 1
            if j == i + 1:
                raise MapParseError("'W' must be followed by a waypoint index", lineno, i + 1)
            cells.append(("W", int(text[i + 1:j])))
            i = j
        else:
            raise MapParseError(f"unknown map character {ch!r}", lineno, i + 1)
    return cells


def _parse_ped_line(text: str, lineno: int, cell_size: float) -> Pedestrian:
    parts = text.split()
    kv = {}
    for part in parts[1:]:
        if "=" not in part:
            raise MapParseError(f"bad pedestrian field {part!r}", lineno)
        k, v = part.split("=", 1)
        kv[k] = v
    try:
        speed = float(kv["speed"])
        radius = float(kv["radius"])
        raw_path = kv["path"]
    except KeyError as exc:
        raise MapParseError(f"pedestrian line missing {exc}", lineno) from None
    pts = []
    for chunk in raw_path.split(";"):
        chunk = chunk.strip()
        if not (chunk.startswith("(") and chunk.endswith(")")):
            raise MapParseError(f"bad pedestrian waypoint {chunk!r}", lineno)
        r_s, c_s = chunk[1:-1].split(",")
        r, c = int(r_s), int(c_s)
        pts.append(((c + 0.5) * cell_size, (r + 0.5) * cell_size))
    if not pts:
        raise MapParseError("pedestrian path is empty", lineno)
    return Pedestrian(path=tuple(pts), speed=speed, radius=radius,
                      pos=pts[0], target=1 % len(pts))


def load_map(text: str, name: str = "") -> WorldMap:
    """Parse an ASCII map document into a validated WorldMap."""
    lines = text.splitlines()
    if not lines:
        raise MapParseError("empty map document", 1)
    header = lines[0].strip()
    if not header.startswith(MAP_MAGIC):
        raise MapParseError(f"expected header starting with {MAP_MAGIC!r}", 1)
    cell_size = None
    for tok in header[len(MAP_MAGIC):].split():
        if tok.startswith("cell="):
            cell_size = float(tok[5:])
    if cell_size is None:
        raise MapParseError("header missing cell=<meters>", 1)
    if cell_size <= 0:
        raise MapValidationError("cell_size must be > 0")

    grid_rows: list[list[tuple[str, int]]] = []
    spawn_heading = 0.0
    ped_lines: list[tuple[str, int]] = []
    past_grid = False
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip()
        if not line.strip():
            continue
        if line.startswith("spawn_heading="):
            spawn_heading = float(line.split("=", 1)[1])
            past_grid = True
        elif line.startswith("PED"):
            ped_lines.append((line, lineno))
            past_grid = True
        elif past_grid:
            raise MapParseError("grid rows must precede spawn_heading/PED lines", lineno)
        else:
            grid_rows.append(_parse_grid_line(line, lineno))

    if len(grid_rows) < 3 or any(len(r) < 3 for r in grid_rows):
        raise MapValidationError("grid must be at least 3x3 cells")
    width = len(grid_rows[0])
    for idx, r in enumerate(grid_rows):
        if len(r) != width:
            raise MapParseError(f"row has {len(r)} cells, expected {width}", idx + 2)

    grid = np.zeros((len(grid_rows), width), dtype=np.int8)
    spawn_cell = None
    waypoints: dict[int, tuple[float, float]] = {}
    for r, row in enumerate(grid_rows):
        for c, (tok, widx) in enumerate(row):
            if tok == "#":
                grid[r, c] = WALL
            elif tok == "F":
                grid[r, c] = FURNITURE
            elif tok == "S":
                if spawn_cell is not None:
                    raise MapValidationError("multiple spawn cells")
                spawn_cell = (r, c)
            elif tok == "W":
                if widx in waypoints:
                    raise MapValidationError(f"duplicate waypoint index {widx}")
                waypoints[widx] = ((c + 0.5) * cell_size, (r + 0.5) * cell_size)

    if spawn_cell is None:
        raise MapValidationError("map has no spawn cell")
    if grid[spawn_cell] != FREE:
        raise MapValidationError("spawn occupied")
    if waypoints:
        expected = set(range(len(waypoints)))
        if set(waypoints) != expected:
            raise MapValidationError(
                f"waypoint indices must be 0..{len(waypoints) - 1}, got {sorted(waypoints)}")
    route = tuple(waypoints[i] for i in sorted(waypoints))

    peds = tuple(_parse_ped_line(line, lineno, cell_size) for line, lineno in ped_lines)

    spawn = ((spawn_cell[1] + 0.5) * cell_size, (spawn_cell[0] + 0.5) * cell_size,
             wrap_angle(spawn_heading))
    world = WorldMap(grid=grid, cell_size=cell_size, spawn=spawn,
                     route=route, pedestrians=peds, name=name)

    for i, (wx, wy) in enumerate(route):
        if world.occupied(*world.cell_of(wx, wy)):
            raise MapValidationError(f"route waypoint {i} lies in an occupied cell")
    for p, ped in enumerate(peds):
        for wx, wy in ped.path:
            if world.occupied(*world.cell_of(wx, wy)):
                raise MapValidationError(f"pedestrian {p} waypoint in an occupied cell")
    return world


def load_map_file(path, name: str = "") -> WorldMap:
    with open(path, "r", encoding="utf-8") as fh:
        return load_map(fh.read(), name=name or str(path))


# ---------------------------------------------------------------------------
# collision queries

def disc_hits_cells(world: WorldMap, x: float, y: float, radius: float) -> bool:
    """True if the disc overlaps any occupied cell (or leaves the grid)."""
    cs = world.cell_size
    r0 = int(math.floor((y - radius) / cs))
    r1 = int(math.floor((y + radius) / cs))
    c0 = int(math.floor((x - radius) / cs))
    c1 = int(math.floor((x + radius) / cs))
    for r in range(r0, r1 + 1):
        for c in range(c0, c1 + 1):
            if not world.occupied(r, c):
                continue
            # distance from disc center to the cell rectangle
            nx = min(max(x, c * cs), (c + 1) * cs)
            ny = min(max(y, r * cs), (r + 1) * cs)
            if (x - nx) ** 2 + (y - ny) ** 2 <= radius * radius:
                return True
    return False


def disc_hits_pedestrian(world: WorldMap, x: float, y: float, radius: float) -> bool:
    for ped in world.pedestrians:
        px, py = ped.pos
        rr = radius + ped.radius
        if (x - px) ** 2 + (y - py) ** 2 <= rr * rr:
            return True
    return False


def pose_collides(world: WorldMap, x: float, y: float,
                  radius: float = ROBOT_RADIUS) -> bool:
    return disc_hits_cells(world, x, y, radius) or disc_hits_pedestrian(world, x, y, radius)


# ---------------------------------------------------------------------------
# stepping

def step(world: WorldMap, s: RobotState, a: Action, dt: float,
         radius: float = ROBOT_RADIUS,
         substeps: int = COLLISION_SUBSTEPS) -> RobotState:
    """Advance the robot one tick of explicit-Euler unicycle kinematics.

    The swept path is sampled at `substeps` points; the pose freezes at the
    first colliding sample, with the full dt still charged to the clock.
    """
    if dt <= 0:
        raise ContractViolation("step requires dt > 0")
    if s.collided:
        raise ContractViolation("cannot step a collided robot state")
    v, w = denormalize(a)
    x, y, th = s.x, s.y, s.heading
    h = dt / substeps
    collided = False
    for _ in range(substeps):
        x += v * math.cos(th) * h
        y += v * math.sin(th) * h
        th = wrap_angle(th + w * h)
        if pose_collides(world, x, y, radius):
            collided = True
            break
    return RobotState(x=x, y=y, heading=th, last_action=a,
                      collided=collided, t=s.t + dt)


def step_pedestrians(world: WorldMap, dt: float) -> WorldMap:
    """Advance every pedestrian along its cyclic waypoint path."""
    if dt <= 0:
        raise ContractViolation("step_pedestrians requires dt > 0")
    if not world.pedestrians:
        return world
    moved = []
    for ped in world.pedestrians:
        if ped.speed == 0.0 or len(ped.path) < 2:
            moved.append(ped)
            continue
        px, py = ped.pos
        target = ped.target
        remaining = ped.speed * dt
        # piecewise advance, snapping onto waypoints and cycling
        for _ in range(len(ped.path) * 4 + 4):
            if remaining <= 0:
                break
            tx, ty = ped.path[target]
            d = math.hypot(tx - px, ty - py)
            if d <= remaining:
                px, py = tx, ty
                remaining -= d
                target = (target + 1) % len(ped.path)
                if d == 0.0 and remaining == ped.speed * dt:
                    continue
            else:
                px += (tx - px) / d * remaining
                py += (ty - py) / d * remaining
                remaining = 0.0
        moved.append(replace(ped, pos=(px, py), target=target))
    return replace(world, pedestrians=tuple(moved))


# ---------------------------------------------------------------------------
# raycasting

@dataclass
class RayHit:
    dist: float
    material: int        # WALL / FURNITURE, or -1 for pedestrian, 0 for no hit
    side: int            # 0 = crossed a vertical (x) face, 1 = horizontal (y)
    cell: tuple[int, int]
    u: float             # fractional position along the struck face, [0,1)


_NO_HIT = RayHit(dist=math.inf, material=0, side=0, cell=(-1, -1), u=0.0)


def cast_rays(world: WorldMap, x: float, y: float, angles: np.ndarray,
              max_dist: float, include_pedestrians: bool = True) -> list[RayHit]:
    """DDA raycast of many rays at once; returns one RayHit per angle.

    All rays share the origin. Pedestrian discs are intersected analytically
    and merged with the grid hit per ray.
    """
    angles = np.asarray(angles, dtype=np.float64)
    n = angles.size
    dirx = np.cos(angles)
    diry = np.sin(angles)
    cs = world.cell_size
    grid = world.grid
    rows, cols = grid.shape

    cell_c = np.full(n, int(x // cs), dtype=np.int64)
    cell_r = np.full(n, int(y // cs), dtype=np.int64)
    step_c = np.where(dirx >= 0, 1, -1)
    step_r = np.where(diry >= 0, 1, -1)
    with np.errstate(divide="ignore"):
        t_delta_x = np.abs(cs / dirx)
        t_delta_y = np.abs(cs / diry)
    next_cx = (cell_c + (step_c > 0)) * cs
    next_cy = (cell_r + (step_r > 0)) * cs
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max_x = np.where(dirx != 0, (next_cx - x) / dirx, np.inf)
        t_max_y = np.where(diry != 0, (next_cy - y) / diry, np.inf)

    dist = np.full(n, np.inf)
    side = np.zeros(n, dtype=np.int64)
    hit_r = np.full(n, -1, dtype=np.int64)
    hit_c = np.full(n, -1, dtype=np.int64)
    active = np.ones(n, dtype=bool)

    while active.any():
        take_x = active & (t_max_x <= t_max_y)
        take_y = active & ~take_x
        t_here = np.where(take_x, t_max_x, t_max_y)
        cell_c = np.where(take_x, cell_c + step_c, cell_c)
        cell_r = np.where(take_y, cell_r + step_r, cell_r)
        t_max_x = np.where(take_x, t_max_x + t_delta_x, t_max_x)
        t_max_y = np.where(take_y, t_max_y + t_delta_y, t_max_y)

        out = (cell_r < 0) | (cell_r >= rows) | (cell_c < 0) | (cell_c >= cols)
        inb_r = np.where(out, 0, cell_r)
        inb_c = np.where(out, 0, cell_c)
        solid = active & (out | (grid[inb_r, inb_c] != FREE))
        newly = solid & (t_here <= max_dist)
        dist[newly] = t_here[newly]
        side[newly] = np.where(take_x[newly], 0, 1)
        hit_r[newly] = cell_r[newly]
        hit_c[newly] = cell_c[newly]
        active &= ~solid
        active &= t_here <= max_dist

    hits = []
    for i in range(n):
        if not np.isfinite(dist[i]):
            hits.append(_NO_HIT)
            continue
        hx = x + dirx[i] * dist[i]
        hy = y + diry[i] * dist[i]
        u = (hy / cs) % 1.0 if side[i] == 0 else (hx / cs) % 1.0
        r, c = int(hit_r[i]), int(hit_c[i])
        if 0 <= r < rows and 0 <= c < cols:
            mat = int(grid[r, c])
        else:
            mat = WALL  # the world edge behaves like wall
        hits.append(RayHit(dist=float(dist[i]), material=mat, side=int(side[i]),
                           cell=(r, c), u=float(u)))

    if include_pedestrians and world.pedestrians:
        for i in range(n):
            best = hits[i].dist
            for pidx, ped in enumerate(world.pedestrians):
                d = _ray_disc(x, y, float(dirx[i]), float(diry[i]),
                              ped.pos[0], ped.pos[1], ped.radius)
                if d is not None and d < best and d <= max_dist:
                    best = d
                    hits[i] = RayHit(dist=d, material=-1, side=0,
                                     cell=(-1, pidx), u=0.0)
    return hits


def _ray_disc(ox, oy, dx, dy, cx, cy, radius):
    """Nearest positive intersection distance of a ray with a disc, or None."""
    fx, fy = ox - cx, oy - cy
    b = fx * dx + fy * dy
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - c
    if disc < 0:
        return None
    root = math.sqrt(disc)
    t = -b - root
    if t < 0:
        t = -b + root
    return t if t >= 0 else None


def cast_ray(world: WorldMap, x: float, y: float, angle: float,
             max_dist: float, include_pedestrians: bool = True) -> RayHit:
    return cast_rays(world, x, y, np.array([angle]), max_dist, include_pedestrians)[0]
