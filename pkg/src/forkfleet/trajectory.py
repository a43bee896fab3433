"""Trajectory samples and the CSV interchange format.

The trajectory CSV is the single source of motion truth shared by the
simulator, the replay path, the battery model and both analyses. Columns:
t,vehicle_id,x,y,heading,speed,fork_height,load_mass,soc. Lines starting
with '#' are provenance comments and are skipped on read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


CSV_HEADER = "t,vehicle_id,x,y,heading,speed,fork_height,load_mass,soc"


class SchemaError(ValueError):
    """Trajectory CSV does not match the documented schema."""


class UnsortedSamples(ValueError):
    """Per-vehicle samples must be strictly increasing in t."""


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    vehicle_id: int
    x: float
    y: float
    heading: float
    speed: float
    fork_height: float = 0.0
    load_mass: float = 0.0
    soc: float = 1.0


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_csv(samples, fileobj, header_comment: str = "") -> None:
    w = fileobj.write
    if header_comment:
        w(f"# {header_comment}\n")
    w(CSV_HEADER + "\n")
    for s in samples:
        w(",".join((_fmt(s.t), str(s.vehicle_id), _fmt(s.x), _fmt(s.y),
                    _fmt(s.heading), _fmt(s.speed), _fmt(s.fork_height),
                    _fmt(s.load_mass), _fmt(s.soc))) + "\n")


def read_csv(fileobj):
    """Parse samples; raises SchemaError naming the first offending line."""
    samples = []
    header_seen = False
    last_t = {}
    for lineno, raw in enumerate(fileobj, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != CSV_HEADER:
                raise SchemaError(f"line {lineno}: expected header '{CSV_HEADER}'")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 9:
            raise SchemaError(f"line {lineno}: expected 9 columns, got {len(parts)}")
        try:
            s = TrajectorySample(float(parts[0]), int(parts[1]), float(parts[2]),
                                 float(parts[3]), float(parts[4]), float(parts[5]),
                                 float(parts[6]), float(parts[7]), float(parts[8]))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        if s.vehicle_id in last_t and s.t <= last_t[s.vehicle_id]:
            raise SchemaError(
                f"line {lineno}: samples for vehicle {s.vehicle_id} not strictly increasing in t"
            )
        last_t[s.vehicle_id] = s.t
        samples.append(s)
    if not header_seen:
        raise SchemaError("line 1: empty file, header missing")
    return samples


def split_by_vehicle(samples):
    """Group samples into {vehicle_id: [samples sorted by t]}; validates order."""
    out = {}
    for s in samples:
        out.setdefault(s.vehicle_id, []).append(s)
    for vid, ss in out.items():
        for a, b in zip(ss, ss[1:]):
            if b.t <= a.t:
                raise UnsortedSamples(f"vehicle {vid} samples not strictly increasing at t={b.t}")
    return out


def interpolate(a: TrajectorySample, b: TrajectorySample, t: float) -> TrajectorySample:
    """Linear pose/speed interpolation between two samples of one vehicle."""
    if b.t == a.t:
        return a
    u = (t - a.t) / (b.t - a.t)
    # shortest angular interpolation for heading
    dh = math.remainder(b.heading - a.heading, 2.0 * math.pi)
    return TrajectorySample(
        t=t,
        vehicle_id=a.vehicle_id,
        x=a.x + (b.x - a.x) * u,
        y=a.y + (b.y - a.y) * u,
        heading=a.heading + dh * u,
        speed=a.speed + (b.speed - a.speed) * u,
        fork_height=a.fork_height + (b.fork_height - a.fork_height) * u,
        load_mass=a.load_mass + (b.load_mass - a.load_mass) * u,
        soc=a.soc + (b.soc - a.soc) * u,
    )


def sample_at(series, t: float):
    """Interpolated sample at time t, or None if t is outside the series span."""
    if not series or t < series[0].t - 1e-12 or t > series[-1].t + 1e-12:
        return None
    lo, hi = 0, len(series) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if series[mid].t < t:
            lo = mid + 1
        else:
            hi = mid
    if series[lo].t >= t and lo > 0:
        a, b = series[lo - 1], series[lo]
    else:
        a = b = series[lo]
    if a is b:
        return a
    return interpolate(a, b, min(max(t, a.t), b.t))
