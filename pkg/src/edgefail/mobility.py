"""Vehicle mobility: synthetic waypoint traces, CSV ingestion, demand binning.

Positions live in a flat km coordinate frame covering the grid of edge
coverage cells (default 3x3 cells of 5 km over a 15x15 km^2 area, one
edge node per cell center).  Trace files are converted into the same
frame by linearly projecting their bounding box onto the grid area.

Time units are 0-based here: a horizon of H yields request sets for
units 0..H-1.  The simulation loop consumes them with its own clock.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import IngestError
from .model import DelayModel, EdgeNode, ServiceRequest


@dataclass(frozen=True)
class GridMap:
    """Rectangular grid of edge coverage cells; one node per cell center."""

    rows: int = 3
    cols: int = 3
    cell_km: float = 5.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one cell")
        if self.cell_km <= 0:
            raise ValueError("cell_km must be > 0")

    @property
    def width_km(self) -> float:
        return self.cols * self.cell_km

    @property
    def height_km(self) -> float:
        return self.rows * self.cell_km

    @property
    def num_cells(self) -> int:
        return self.rows * self.cols

    def node_locations(self) -> list[tuple[float, float]]:
        """Cell centers in row-major order (node id = row * cols + col)."""
        x0, y0 = self.origin
        return [
            (x0 + (c + 0.5) * self.cell_km, y0 + (r + 0.5) * self.cell_km)
            for r in range(self.rows)
            for c in range(self.cols)
        ]

    def center(self) -> tuple[float, float]:
        x0, y0 = self.origin
        return (x0 + self.width_km / 2.0, y0 + self.height_km / 2.0)

    def contains(self, xy: tuple[float, float]) -> bool:
        x0, y0 = self.origin
        return (x0 <= xy[0] <= x0 + self.width_km) and (y0 <= xy[1] <= y0 + self.height_km)

    def diagonal_km(self) -> float:
        return math.hypot(self.width_km, self.height_km)


@dataclass(frozen=True)
class TracePoint:
    vehicle_id: str
    timestamp: float
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)
                and math.isfinite(self.timestamp)):
            raise ValueError("trace point fields must be finite")


@dataclass(frozen=True)
class BoundingBox:
    """Geographic box mapped linearly onto the grid area."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bounding box must be non-degenerate")

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def to_xy(self, lat: float, lon: float, grid: GridMap) -> tuple[float, float]:
        fx = (lon - self.lon_min) / (self.lon_max - self.lon_min)
        fy = (lat - self.lat_min) / (self.lat_max - self.lat_min)
        x0, y0 = grid.origin
        return (x0 + fx * grid.width_km, y0 + fy * grid.height_km)


@dataclass(frozen=True)
class MobilityModel:
    """Random-waypoint parameters for the synthetic generator.

    Every vehicle issues a request each unit with probability
    ``p_request``; the requested service is re-drawn uniformly each time.
    """

    p_request: float = 1.0
    speed_min_kmh: float = 20.0
    speed_max_kmh: float = 60.0
    time_unit_s: float = 60.0

    def __post_init__(self):
        if not (0.0 <= self.p_request <= 1.0):
            raise ValueError("p_request must be in [0, 1]")
        if not (0.0 < self.speed_min_kmh <= self.speed_max_kmh):
            raise ValueError("need 0 < speed_min_kmh <= speed_max_kmh")
        if self.time_unit_s <= 0:
            raise ValueError("time_unit_s must be > 0")


@dataclass(frozen=True)
class IngestResult:
    requests_by_unit: list
    dropped: int  # rows outside the bounding box
    malformed: int  # rows skipped as unparsable


TRACE_HEADER = ["vehicle_id", "timestamp", "lat", "lon"]


def generate_synthetic(
    seed: int,
    vehicles: int,
    grid: GridMap,
    horizon: int,
    model: MobilityModel | None = None,
    num_services: int = 8,
) -> list[list[ServiceRequest]]:
    """Deterministic random-waypoint request stream.

    Returns one list of requests per time unit 0..horizon-1.  Vehicles
    never leave the grid area; identical (seed, parameters) reproduce the
    stream bit for bit.
    """
    if vehicles < 1:
        raise ValueError("vehicles must be >= 1")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if num_services < 1:
        raise ValueError("num_services must be >= 1")
    model = model or MobilityModel()
    rng = np.random.default_rng(seed)
    x0, y0 = grid.origin
    w, h = grid.width_km, grid.height_km

    pos = rng.random((vehicles, 2)) * [w, h] + [x0, y0]
    waypoint = rng.random((vehicles, 2)) * [w, h] + [x0, y0]
    step_km = rng.uniform(model.speed_min_kmh, model.speed_max_kmh, vehicles) * (
        model.time_unit_s / 3600.0
    )
    ids = [f"v{i:04d}" for i in range(vehicles)]

    units: list[list[ServiceRequest]] = []
    for t in range(horizon):
        requesting = rng.random(vehicles) < model.p_request
        services = rng.integers(0, num_services, vehicles)
        batch = [
            ServiceRequest(
                vehicle=ids[i],
                location=(float(pos[i, 0]), float(pos[i, 1])),
                time=t,
                service=int(services[i]),
            )
            for i in range(vehicles)
            if requesting[i]
        ]
        units.append(batch)

        # advance toward waypoints; arrivals pick a new one
        delta = waypoint - pos
        dist = np.hypot(delta[:, 0], delta[:, 1])
        arrived = dist <= step_km
        moving = ~arrived & (dist > 0)
        pos[arrived] = waypoint[arrived]
        pos[moving] += delta[moving] * (step_km[moving] / dist[moving])[:, None]
        if arrived.any():
            waypoint[arrived] = rng.random((int(arrived.sum()), 2)) * [w, h] + [x0, y0]
    return units


def ingest_trace(
    path,
    bbox: BoundingBox,
    grid: GridMap,
    time_unit_s: float = 60.0,
    num_services: int = 8,
    seed: int = 0,
    carry_gap: int = 5,
) -> IngestResult:
    """Turn a `vehicle_id,timestamp,lat,lon` CSV into per-unit requests.

    Rows outside ``bbox`` are dropped (counted), malformed rows skipped
    (counted separately).  Within a unit a vehicle's last known position
    wins; vehicles with no point in a unit are carried forward at their
    last position for up to ``carry_gap`` units, then considered departed.
    Every present vehicle issues one request per unit; the service type
    is drawn uniformly (seeded).

    Raises:
        IngestError: on a missing/invalid header or zero usable rows.
    """
    if time_unit_s <= 0:
        raise ValueError("time_unit_s must be > 0")
    malformed = 0
    dropped = 0
    rows: list[tuple[str, float, float, float]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if [c.strip() for c in header] != TRACE_HEADER:
            raise IngestError(f"{path}: expected header {','.join(TRACE_HEADER)}")
        for raw in reader:
            if len(raw) != 4:
                malformed += 1
                continue
            try:
                point = TracePoint(raw[0], float(raw[1]), float(raw[2]), float(raw[3]))
            except ValueError:
                malformed += 1
                continue
            if not bbox.contains(point.lat, point.lon):
                dropped += 1
                continue
            rows.append((point.vehicle_id, point.timestamp, point.lat, point.lon))
    if not rows:
        raise IngestError(f"{path}: no usable rows (dropped={dropped}, malformed={malformed})")

    t0 = min(r[1] for r in rows)
    horizon = int((max(r[1] for r in rows) - t0) // time_unit_s) + 1

    # last position per (vehicle, unit); later rows within a unit win,
    # ties on timestamp resolved by file order
    last_in_unit: dict[str, dict[int, tuple[float, tuple[float, float]]]] = {}
    for vid, ts, lat, lon in rows:
        unit = int((ts - t0) // time_unit_s)
        xy = bbox.to_xy(lat, lon, grid)
        seen = last_in_unit.setdefault(vid, {})
        if unit not in seen or ts >= seen[unit][0]:
            seen[unit] = (ts, xy)

    rng = np.random.default_rng(seed)
    units: list[list[ServiceRequest]] = []
    last_pos: dict[str, tuple[float, tuple[float, float]]] = {}  # vid -> (unit, xy)
    for t in range(horizon):
        present: list[tuple[str, tuple[float, float]]] = []
        for vid in sorted(last_in_unit):
            if t in last_in_unit[vid]:
                xy = last_in_unit[vid][t][1]
                last_pos[vid] = (t, xy)
                present.append((vid, xy))
            elif vid in last_pos and t - last_pos[vid][0] <= carry_gap:
                present.append((vid, last_pos[vid][1]))
        services = rng.integers(0, num_services, len(present))
        units.append(
            [
                ServiceRequest(vehicle=vid, location=xy, time=t, service=int(services[i]))
                for i, (vid, xy) in enumerate(present)
            ]
        )
    return IngestResult(units, dropped=dropped, malformed=malformed)


def derive_demand(requests: list[ServiceRequest], num_services: int) -> np.ndarray:
    """Per-service request counts lambda_s for one time unit."""
    lam = np.zeros(num_services)
    for r in requests:
        lam[r.service] += 1.0
    return lam


def derive_delay_matrix(
    requests: list[ServiceRequest],
    nodes: list[EdgeNode],
    num_services: int,
    alpha_ms_per_km: float = 2.0,
    base_ms: float = 1.0,
    fallback_point: tuple[float, float] | None = None,
) -> DelayModel:
    """Affine propagation delay d[e, s] = alpha * mean distance + base.

    For a service with requests, the distance is averaged over its
    requesting vehicles.  Services with no demand fall back to the mean
    position of all requesting vehicles (or ``fallback_point`` when the
    unit is empty), so every entry stays finite.
    """
    if alpha_ms_per_km < 0 or base_ms < 0:
        raise ValueError("delay model parameters must be >= 0")
    node_xy = np.array([n.location for n in nodes])
    d = np.empty((len(nodes), num_services))
    if requests:
        pts = np.array([r.location for r in requests])
        svc = np.array([r.service for r in requests])
        centroid = pts.mean(axis=0)
    else:
        if fallback_point is None:
            raise ValueError("fallback_point required when there are no requests")
        pts = np.empty((0, 2))
        svc = np.empty(0, dtype=int)
        centroid = np.asarray(fallback_point, dtype=float)
    centroid_dist = np.hypot(node_xy[:, 0] - centroid[0], node_xy[:, 1] - centroid[1])
    for s in range(num_services):
        mask = svc == s
        if mask.any():
            p = pts[mask]
            dist = np.hypot(
                node_xy[:, 0][:, None] - p[:, 0], node_xy[:, 1][:, None] - p[:, 1]
            ).mean(axis=1)
        else:
            dist = centroid_dist
        d[:, s] = alpha_ms_per_km * dist + base_ms
    return DelayModel(d=d)
