"""Deterministic fixed-timestep fleet simulation.

Single-threaded explicit-Euler world stepping: task assignment onto free
parking spots, A* route planning, trapezoidal speed profiles with curvature
slowdown, top-down collision avoidance, fork lift/lower phases, battery/SOC
integration and trajectory recording. All randomness flows from one
splitmix64 generator seeded by the scenario seed, so (scenario, seed, dt)
fully determines every emitted sample.

Collision policy (ours; the underlying idea is only a top-down scheme with
global knowledge of poses and velocities): the higher-id vehicle of a
conflicting pair yields via a horizon-based speed cap, and a hard proximity
cap applies to both vehicles so that pairwise center distance provably never
drops below d_safe between steps. A vehicle stopped by conflicts for longer
than t_deadlock gets priority over its blockers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import battery as bat
from .rng import SplitMix64
from .roadnet import Path, RoadGraph, astar, nearest_node
from .trajectory import TrajectorySample, sample_at, split_by_vehicle


class NoFreeSpot(RuntimeError):
    pass


class VehicleBusy(RuntimeError):
    pass


class SpotOccupied(RuntimeError):
    pass


class UnreachableDestination(RuntimeError):
    pass


@dataclass(frozen=True)
class KinematicsParams:
    v_max: float = 4.0        # m/s
    a_max: float = 1.0        # m/s^2 accelerating
    b_max: float = 1.5        # m/s^2 braking
    a_lat_max: float = 1.0    # m/s^2 lateral, for curve slowdown
    lift_speed: float = 0.3   # m/s fork travel
    d_safe: float = 3.0       # m minimum pairwise separation
    horizon: float = 5.0      # s conflict prediction horizon
    t_deadlock: float = 10.0  # s before a blocked vehicle gains priority


@dataclass(frozen=True)
class Task:
    kind: str                 # "pick_and_place" | "relocate"
    origin_spot: int
    dest_spot: int
    pickup_mass: float
    lift_height: float


@dataclass
class VehicleState:
    id: int
    x: float
    y: float
    heading: float
    speed: float = 0.0
    truck_mass: float = 3000.0
    load_mass: float = 0.0
    fork_height: float = 0.0
    soc: float = 1.0
    max_load: float = 2000.0


PHASE_IDLE = "idle"
PHASE_LIFT = "lift"
PHASE_DRIVE = "drive"
PHASE_LOWER = "lower"


@dataclass
class _Route:
    points: list              # (x, y) polyline
    cumlen: list              # arc length at each point
    seg_limits: list          # speed limit per segment
    vert_caps: list           # curvature speed cap per vertex
    s: float = 0.0

    @property
    def total(self):
        return self.cumlen[-1]


@dataclass
class _VehicleCtl:
    """Per-vehicle controller bookkeeping, internal to the world."""
    phase: str = PHASE_IDLE
    task: Optional[Task] = None
    route: Optional[_Route] = None
    fork_target: float = 0.0
    current_spot: Optional[int] = None
    blocked_for: float = 0.0
    soc_state: Optional[bat.SocState] = None
    distance_driven: float = 0.0
    tasks_completed: int = 0


@dataclass
class StepEvents:
    assignments: list = field(default_factory=list)   # (vehicle_id, Task)
    arrivals: list = field(default_factory=list)      # (vehicle_id, spot_id)
    completions: list = field(default_factory=list)   # (vehicle_id, Task)


def _menger_radius(p0, p1, p2):
    """Circumradius of three points; inf when (near) collinear."""
    a = math.dist(p1, p2)
    b = math.dist(p0, p2)
    c = math.dist(p0, p1)
    area2 = abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    if area2 < 1e-12:
        return math.inf
    return a * b * c / (2.0 * area2)


class World:
    def __init__(self, graph: RoadGraph, vehicles, dt: float = 0.1, seed: int = 0,
                 kin: KinematicsParams = KinematicsParams(),
                 battery_params: bat.BatteryParams = bat.BatteryParams(),
                 fork_mass: float = 100.0,
                 pickup_mass: float = 500.0, lift_height: float = 1.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.graph = graph
        self.vehicles = list(vehicles)
        self.dt = dt
        self.rng = SplitMix64(seed)
        self.seed = seed
        self.kin = kin
        self.battery_params = battery_params
        self.fork_mass = fork_mass
        self.pickup_mass = pickup_mass
        self.lift_height = lift_height
        self.step_count = 0
        self.reserved = {}  # spot_id -> vehicle_id
        self.ctl = {v.id: _VehicleCtl(soc_state=bat.SocState(v.soc)) for v in self.vehicles}
        self._prev_samples = {v.id: self._sample_of(v, 0.0) for v in self.vehicles}
        self.samples = []

    @property
    def clock(self) -> float:
        return self.step_count * self.dt

    # --- construction helpers ------------------------------------------------

    @classmethod
    def spawn_at_spots(cls, graph: RoadGraph, n_vehicles: int, **kwargs) -> "World":
        """Place n vehicles on the first n parking spots."""
        if n_vehicles > len(graph.spots):
            raise NoFreeSpot(f"{n_vehicles} vehicles but only {len(graph.spots)} spots")
        vehicles = []
        spots = sorted(graph.spots, key=lambda s: s.id)
        for i in range(n_vehicles):
            spot = spots[i]
            x, y = graph.spot_anchor_xy(spot)
            hdg = graph.waypoints[spot.edge_src].heading
            vehicles.append(VehicleState(id=i, x=x, y=y, heading=hdg))
            spot.occupied_by = i
        world = cls(graph, vehicles, **kwargs)
        for i in range(n_vehicles):
            world.ctl[i].current_spot = spots[i].id
        return world

    def _spot_by_id(self, spot_id: int):
        for s in self.graph.spots:
            if s.id == spot_id:
                return s
        raise KeyError(f"no spot {spot_id}")

    def vehicle(self, vid: int) -> VehicleState:
        for v in self.vehicles:
            if v.id == vid:
                return v
        raise KeyError(f"no vehicle {vid}")

    # --- task assignment -----------------------------------------------------

    def free_spots(self, exclude: Optional[int] = None):
        out = []
        for s in sorted(self.graph.spots, key=lambda s: s.id):
            if s.occupied_by is None and s.id not in self.reserved and s.id != exclude:
                out.append(s)
        return out

    def assign_task(self, vehicle_id: int, policy=("random", None)) -> Task:
        ctl = self.ctl[vehicle_id]
        if ctl.phase != PHASE_IDLE:
            raise VehicleBusy(f"vehicle {vehicle_id} is in phase {ctl.phase}")
        kind, fixed_dest = policy
        if kind == "fixed":
            spot = self._spot_by_id(fixed_dest)
            if spot.occupied_by is not None or spot.id in self.reserved:
                raise SpotOccupied(f"spot {fixed_dest} is occupied or reserved")
            dest = spot
        else:
            free = self.free_spots(exclude=ctl.current_spot)
            if not free:
                raise NoFreeSpot("no unoccupied, unreserved parking spot available")
            dest = free[self.rng.randrange(len(free))]
        task = Task("pick_and_place", ctl.current_spot if ctl.current_spot is not None else -1,
                    dest.id, self.pickup_mass, self.lift_height)
        self.reserved[dest.id] = vehicle_id
        ctl.task = task
        ctl.phase = PHASE_LIFT
        ctl.fork_target = task.lift_height
        self.vehicle(vehicle_id).load_mass = task.pickup_mass
        return task

    # --- routing -------------------------------------------------------------

    def plan_route(self, vehicle_id: int, task: Task) -> Path:
        """Shortest path from the vehicle's snapped node to the destination
        spot's anchor-edge start node. Raises UnreachableDestination."""
        v = self.vehicle(vehicle_id)
        spot = self._spot_by_id(task.dest_spot)
        src = nearest_node(self.graph, v.x, v.y)
        path = astar(self.graph, src, spot.edge_src)
        if path is None:
            raise UnreachableDestination(
                f"vehicle {vehicle_id} cannot reach spot {task.dest_spot}")
        return path

    def _build_route(self, vehicle_id: int, task: Task) -> _Route:
        v = self.vehicle(vehicle_id)
        path = self.plan_route(vehicle_id, task)
        spot = self._spot_by_id(task.dest_spot)
        pts = []
        limits = []
        if math.hypot(v.x - self.graph.waypoints[path.nodes[0]].x,
                      v.y - self.graph.waypoints[path.nodes[0]].y) > 1e-9:
            pts.append((v.x, v.y))
            limits.append(self.kin.v_max)
        for node in path.nodes:
            wp = self.graph.waypoints[node]
            pts.append((wp.x, wp.y))
        for a, b in zip(path.nodes, path.nodes[1:]):
            limits.append(self.graph.edge_between(a, b).speed_limit)
        if spot.offset > 1e-9:
            pts.append(self.graph.spot_anchor_xy(spot))
            limits.append(self.graph.edge_between(spot.edge_src, spot.edge_dst).speed_limit)
        # drop duplicate consecutive points
        clean_pts, clean_limits = [pts[0]], []
        for i in range(1, len(pts)):
            if math.dist(pts[i], clean_pts[-1]) > 1e-9:
                clean_pts.append(pts[i])
                clean_limits.append(limits[i - 1])
        pts, limits = clean_pts, clean_limits
        cum = [0.0]
        for a, b in zip(pts, pts[1:]):
            cum.append(cum[-1] + math.dist(a, b))
        caps = [math.inf] * len(pts)
        for i in range(1, len(pts) - 1):
            r = _menger_radius(pts[i - 1], pts[i], pts[i + 1])
            if math.isfinite(r):
                caps[i] = math.sqrt(self.kin.a_lat_max * r)
        return _Route(pts, cum, limits, caps)

    # --- collision avoidance -------------------------------------------------

    def resolve_conflicts(self):
        """Per-vehicle speed caps for this step -> {vehicle_id: cap}."""
        kin = self.kin
        dt = self.dt
        caps = {}

        def tighten(vid, cap):
            caps[vid] = min(caps.get(vid, math.inf), max(0.0, cap))

        vs = sorted(self.vehicles, key=lambda v: v.id)
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                a, b = vs[i], vs[j]
                gap = math.hypot(b.x - a.x, b.y - a.y)
                # soft horizon-based yielding
                rx, ry = b.x - a.x, b.y - a.y
                vax, vay = a.speed * math.cos(a.heading), a.speed * math.sin(a.heading)
                vbx, vby = b.speed * math.cos(b.heading), b.speed * math.sin(b.heading)
                dvx, dvy = vbx - vax, vby - vay
                dv2 = dvx * dvx + dvy * dvy
                t_star = 0.0 if dv2 < 1e-12 else min(max(-(rx * dvx + ry * dvy) / dv2, 0.0),
                                                     kin.horizon)
                min_sep = math.hypot(rx + dvx * t_star, ry + dvy * t_star)
                if min_sep < kin.d_safe:
                    # deadlock breaker: a long-blocked yielder gains priority
                    yielder = b
                    if (self.ctl[b.id].blocked_for > kin.t_deadlock
                            and self.ctl[a.id].blocked_for <= kin.t_deadlock):
                        yielder = a
                    tighten(yielder.id, (gap - kin.d_safe) / kin.horizon)
                # hard proximity caps keep the pair >= d_safe across one step
                trigger = kin.d_safe + 2.0 * (kin.v_max + kin.a_max * dt) * dt + 1.0
                if gap < trigger:
                    slack = max(0.0, (gap - kin.d_safe) / dt)
                    # priority vehicle may close at most the whole slack
                    tighten(a.id, slack)
                    a_bound = min(kin.v_max, a.speed + kin.a_max * dt, slack)
                    tighten(b.id, slack - a_bound)
        return caps

    # --- stepping ------------------------------------------------------------

    def step(self, auto_assign: bool = True, policy=("random", None)) -> StepEvents:
        events = StepEvents()
        dt = self.dt
        kin = self.kin
        if auto_assign:
            for v in sorted(self.vehicles, key=lambda v: v.id):
                if self.ctl[v.id].phase == PHASE_IDLE:
                    try:
                        task = self.assign_task(v.id, policy)
                        events.assignments.append((v.id, task))
                    except (NoFreeSpot, SpotOccupied):
                        pass
        caps = self.resolve_conflicts()
        for v in sorted(self.vehicles, key=lambda v: v.id):
            ctl = self.ctl[v.id]
            if ctl.phase == PHASE_IDLE:
                v.speed = 0.0
            elif ctl.phase == PHASE_LIFT:
                v.speed = 0.0
                v.fork_height = min(ctl.fork_target, v.fork_height + kin.lift_speed * dt)
                if v.fork_height >= ctl.fork_target - 1e-12:
                    v.fork_height = ctl.fork_target
                    # load picked; leave the origin spot and drive off
                    if ctl.current_spot is not None:
                        self._spot_by_id(ctl.current_spot).occupied_by = None
                        ctl.current_spot = None
                    ctl.route = self._build_route(v.id, ctl.task)
                    ctl.phase = PHASE_DRIVE
            elif ctl.phase == PHASE_DRIVE:
                self._advance_drive(v, ctl, caps.get(v.id, math.inf), events)
            elif ctl.phase == PHASE_LOWER:
                v.speed = 0.0
                v.fork_height = max(0.0, v.fork_height - kin.lift_speed * dt)
                if v.fork_height <= 1e-12:
                    v.fork_height = 0.0
                    v.load_mass = 0.0
                    events.completions.append((v.id, ctl.task))
                    ctl.tasks_completed += 1
                    ctl.task = None
                    ctl.phase = PHASE_IDLE
        self.step_count += 1
        t = self.clock
        for v in self.vehicles:
            prev = self._prev_samples[v.id]
            cur = self._sample_of(v, t)
            consts = bat.VehicleConstants(v.truck_mass, self.fork_mass)
            draw, regen = bat.segment_energy(prev, cur, consts, self.battery_params)
            self.ctl[v.id].soc_state = bat.apply_energy(
                self.ctl[v.id].soc_state, draw, regen, self.battery_params)
            v.soc = self.ctl[v.id].soc_state.soc
            cur = replace(cur, soc=v.soc)
            self._prev_samples[v.id] = cur
        return events

    def _advance_drive(self, v, ctl, conflict_cap, events):
        kin = self.kin
        dt = self.dt
        route = ctl.route
        s = route.s
        total = route.total
        # segment index at s
        seg = 0
        while seg < len(route.cumlen) - 2 and s >= route.cumlen[seg + 1] - 1e-12:
            seg += 1
        v_target = min(kin.v_max, route.seg_limits[seg] if route.seg_limits else kin.v_max)

        def envelope(cap, d):
            # max speed now so that braking at b_max reaches `cap` after `d`,
            # accounting for the distance already covered during this step
            bd = kin.b_max * dt
            return -bd + math.sqrt(bd * bd + cap * cap + 2.0 * kin.b_max * max(0.0, d))

        lookahead = kin.v_max * kin.v_max / (2.0 * kin.b_max) + kin.v_max * dt + 1.0
        v_target = min(v_target, envelope(0.0, total - s))
        for j in range(seg + 1, len(route.points)):
            d = route.cumlen[j] - s
            if d > lookahead:
                break
            cap = route.vert_caps[j]
            if math.isfinite(cap):
                v_target = min(v_target, envelope(cap, d))
            if j < len(route.seg_limits):
                v_target = min(v_target, envelope(route.seg_limits[j], d))
        if v_target >= v.speed:
            new_v = min(v_target, v.speed + kin.a_max * dt)
        else:
            new_v = max(v_target, v.speed - kin.b_max * dt)
        new_v = min(new_v, conflict_cap)
        if new_v < 0.01 and conflict_cap < 0.01:
            ctl.blocked_for += dt
        else:
            ctl.blocked_for = 0.0
        # trapezoidal displacement, but never beyond the conflict cap so the
        # pairwise separation argument stays valid
        v_eff = min(0.5 * (v.speed + new_v), conflict_cap)
        new_s = s + v_eff * dt
        if new_s >= total - 1e-9:
            new_s = total
            new_v = 0.0
            self._place_on_route(v, route, new_s)
            ctl.distance_driven += new_s - s
            route.s = new_s
            v.speed = 0.0
            ctl.phase = PHASE_LOWER
            ctl.fork_target = 0.0
            spot = self._spot_by_id(ctl.task.dest_spot)
            spot.occupied_by = v.id
            del self.reserved[spot.id]
            ctl.current_spot = spot.id
            events.arrivals.append((v.id, spot.id))
            return
        ctl.distance_driven += new_s - s
        route.s = new_s
        v.speed = new_v
        self._place_on_route(v, route, new_s)

    def _place_on_route(self, v, route, s):
        seg = 0
        while seg < len(route.cumlen) - 2 and s >= route.cumlen[seg + 1] - 1e-12:
            seg += 1
        (x0, y0), (x1, y1) = route.points[seg], route.points[seg + 1]
        seg_len = route.cumlen[seg + 1] - route.cumlen[seg]
        frac = (s - route.cumlen[seg]) / seg_len if seg_len > 0 else 1.0
        frac = min(max(frac, 0.0), 1.0)
        v.x = x0 + (x1 - x0) * frac
        v.y = y0 + (y1 - y0) * frac
        v.heading = math.atan2(y1 - y0, x1 - x0)

    def _sample_of(self, v, t):
        return TrajectorySample(t, v.id, v.x, v.y, v.heading, v.speed,
                                v.fork_height, v.load_mass, v.soc)

    # --- recording / running ---------------------------------------------------

    def record_current(self):
        t = self.clock
        for v in sorted(self.vehicles, key=lambda v: v.id):
            self.samples.append(self._sample_of(v, t))

    def run(self, duration: float, auto_assign: bool = True,
            policy=("random", None), record: bool = True):
        """Step for the given duration, recording one sample per vehicle per
        step (plus the initial state). Returns the recorded samples."""
        n_steps = int(round(duration / self.dt))
        if n_steps <= 0:
            return []
        if record:
            self.record_current()
        for _ in range(n_steps):
            self.step(auto_assign=auto_assign, policy=policy)
            if record:
                self.record_current()
        return self.samples

    def summary(self):
        out = []
        for v in sorted(self.vehicles, key=lambda v: v.id):
            ctl = self.ctl[v.id]
            out.append({
                "vehicle_id": v.id,
                "distance_driven": ctl.distance_driven,
                "tasks_completed": ctl.tasks_completed,
                "energy_drawn": ctl.soc_state.cumulative_draw,
                "energy_regenerated": ctl.soc_state.cumulative_regen,
                "final_soc": v.soc,
                "soc_band": bat.soc_band(v.soc),
            })
        return out


def replay(samples, graph: RoadGraph, dt: float = 0.1,
           consts: bat.VehicleConstants = bat.VehicleConstants(),
           params: bat.BatteryParams = bat.BatteryParams()):
    """Re-grid recorded samples onto a fixed dt timeline and recompute SOC.

    Replayed vehicles are passive: poses interpolate linearly between input
    samples, there is no planning or collision logic, but every segment
    feeds the battery model. A vehicle appearing mid-stream simply spawns at
    its first sample. Returns the regridded samples with recomputed SOC.
    """
    per_vehicle = split_by_vehicle(samples)
    if not per_vehicle:
        return []
    t0 = min(ss[0].t for ss in per_vehicle.values())
    out = []
    for vid in sorted(per_vehicle):
        series = per_vehicle[vid]
        k0 = math.ceil((series[0].t - t0) / dt - 1e-9)
        regridded = []
        k = k0
        while True:
            t = t0 + k * dt
            if t > series[-1].t + 1e-9:
                break
            smp = sample_at(series, min(t, series[-1].t))
            regridded.append(smp)
            k += 1
        state = bat.SocState(series[0].soc)
        if regridded:
            regridded[0] = replace(regridded[0], soc=state.soc)
        for i in range(1, len(regridded)):
            draw, regen = bat.segment_energy(regridded[i - 1], regridded[i], consts, params)
            state = bat.apply_energy(state, draw, regen, params)
            regridded[i] = replace(regridded[i], soc=state.soc)
        out.extend(regridded)
    out.sort(key=lambda s: (s.t, s.vehicle_id))
    return out
