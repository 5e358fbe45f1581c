"""Experiment configuration: defaults, flat key-value files, hashing.

Keys use dotted names (``grid.rows``, ``lbpsvm.k1``, ...).  Precedence is
CLI overrides > config file > defaults.  The default values mirror the
reference scenario: a 3x3 grid of edge nodes over 15x15 km^2, 100
resource units per node, 8 service types with footprints 10..24 and
delay caps 50..120 ms, 30 connections per instance, and an attack every
100th time unit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields

from .errors import ConfigError
from .mobility import BoundingBox, GridMap, MobilityModel
from .model import EdgeNode, ServiceType

POLICIES = ("lb-psvm", "psvm", "br")

DEFAULTS: dict[str, object] = {
    "dataset": "synthetic",
    "policies": "lb-psvm,psvm,br",
    "horizon": 600,
    "seed": 0,
    "out": None,
    "jobs": 1,
    "grid.rows": 3,
    "grid.cols": 3,
    "grid.cell_km": 5.0,
    "node.capacity": 100.0,
    "services.count": 8,
    "service.capacity": 30.0,
    "delay.alpha_ms_per_km": 2.0,
    "delay.base_ms": 1.0,
    "trace.time_unit_s": 60.0,
    "trace.carry_gap": 5,
    "trace.bbox": None,
    "mobility.vehicles": 500,
    "mobility.p_request": 0.2,
    "mobility.speed_min_kmh": 20.0,
    "mobility.speed_max_kmh": 60.0,
    "placement.instances_per_service": 3,
    "placement.strategy": "greedy",
    "br.enabled": True,
    "lbpsvm.k1": None,
    "lbpsvm.k2": None,
    "lbpsvm.epsilon": 1e-3,
    "lbpsvm.kkt_tol": 1e-8,
    "solver.max_iters": 200,
    "queue.ms_per_unit": 1000.0,
    "attack.every": 100,
    "attack.target": "most-loaded",
    "attack.schedule": None,
    "attack.quarantine": None,
    "recovery.delay": 1,
    "monitor.period": 5,
    "monitor.threshold": 0.5,
}

# dotted key -> dataclass field
KEY_MAP = {k: k.replace(".", "_").replace("-", "_") for k in DEFAULTS}
FIELD_MAP = {v: k for k, v in KEY_MAP.items()}

_INT_KEYS = {
    "horizon", "seed", "jobs", "grid.rows", "grid.cols", "services.count",
    "trace.carry_gap", "mobility.vehicles", "placement.instances_per_service",
    "solver.max_iters", "attack.every", "attack.quarantine", "recovery.delay",
    "monitor.period",
}
_FLOAT_KEYS = {
    "grid.cell_km", "node.capacity", "service.capacity", "delay.alpha_ms_per_km",
    "delay.base_ms", "trace.time_unit_s", "mobility.p_request",
    "mobility.speed_min_kmh", "mobility.speed_max_kmh", "lbpsvm.k1", "lbpsvm.k2",
    "lbpsvm.epsilon", "lbpsvm.kkt_tol", "queue.ms_per_unit", "monitor.threshold",
}
_BOOL_KEYS = {"br.enabled"}


def _coerce(key: str, value, where: str = "") -> object:
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() in ("none", "null", ""):
        return None
    try:
        if key in _INT_KEYS:
            return int(str(value))
        if key in _FLOAT_KEYS:
            return float(str(value))
        if key in _BOOL_KEYS:
            if isinstance(value, bool):
                return value
            v = str(value).strip().lower()
            if v in ("true", "1", "yes", "on"):
                return True
            if v in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
    except ValueError as exc:
        raise ConfigError(f"{where}{key}: {exc}") from None
    return str(value)


def parse_config_file(path) -> dict[str, object]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Raises:
        ConfigError: with the offending line number on unknown keys or
            malformed lines.
    """
    out: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(key, value.strip(), where=f"{path}:{lineno}: ")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"
    policies: str = "lb-psvm,psvm,br"
    horizon: int = 600
    seed: int = 0
    out: str | None = None
    jobs: int = 1
    grid_rows: int = 3
    grid_cols: int = 3
    grid_cell_km: float = 5.0
    node_capacity: float = 100.0
    services_count: int = 8
    service_capacity: float = 30.0
    delay_alpha_ms_per_km: float = 2.0
    delay_base_ms: float = 1.0
    trace_time_unit_s: float = 60.0
    trace_carry_gap: int = 5
    trace_bbox: str | None = None
    mobility_vehicles: int = 500
    mobility_p_request: float = 0.2
    mobility_speed_min_kmh: float = 20.0
    mobility_speed_max_kmh: float = 60.0
    placement_instances_per_service: int = 3
    placement_strategy: str = "greedy"
    br_enabled: bool = True
    lbpsvm_k1: float | None = None
    lbpsvm_k2: float | None = None
    lbpsvm_epsilon: float = 1e-3
    lbpsvm_kkt_tol: float = 1e-8
    solver_max_iters: int = 200
    queue_ms_per_unit: float = 1000.0
    attack_every: int = 100
    attack_target: str = "most-loaded"
    attack_schedule: str | None = None
    attack_quarantine: int | None = None
    recovery_delay: int = 1
    monitor_period: int = 5
    monitor_threshold: float = 0.5

    @classmethod
    def from_sources(
        cls,
        file: str | None = None,
        overrides: dict[str, object] | None = None,
    ) -> "ExperimentConfig":
        """Merge defaults, an optional config file, and explicit overrides."""
        merged = dict(DEFAULTS)
        if file is not None:
            merged.update(parse_config_file(file))
        for key, value in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value)
        cfg = cls(**{KEY_MAP[k]: v for k, v in merged.items()})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Raise ConfigError on any out-of-range or inconsistent setting."""
        problems = []
        if self.horizon < 1:
            problems.append("horizon: must be >= 1")
        bad = [p for p in self.policy_list() if p not in POLICIES]
        if bad:
            problems.append(f"policies: unknown {bad}, valid: {','.join(POLICIES)}")
        if not self.policy_list():
            problems.append("policies: need at least one")
        if not (self.dataset == "synthetic" or self.dataset.startswith("trace:")):
            problems.append("dataset: expected 'synthetic' or 'trace:<path>'")
        if self.dataset.startswith("trace:") and self.trace_bbox is None:
            problems.append("trace.bbox: required for trace datasets "
                            "(lat_min,lat_max,lon_min,lon_max)")
        if self.grid_rows < 1 or self.grid_cols < 1 or self.grid_cell_km <= 0:
            problems.append("grid: rows/cols must be >= 1, cell_km > 0")
        if self.services_count < 1:
            problems.append("services.count: must be >= 1")
        if self.service_capacity <= 0 or self.node_capacity <= 0:
            problems.append("capacities must be > 0")
        if self.placement_instances_per_service < 2:
            problems.append("placement.instances_per_service: must be >= 2")
        if self.placement_strategy != "greedy":
            problems.append("placement.strategy: only 'greedy' is available")
        if self.mobility_vehicles < 1:
            problems.append("mobility.vehicles: must be >= 1")
        if not (0.0 <= self.mobility_p_request <= 1.0):
            problems.append("mobility.p_request: must be in [0, 1]")
        if self.attack_every < 1:
            problems.append("attack.every: must be >= 1")
        if self.recovery_delay < 1:
            problems.append("recovery.delay: must be >= 1")
        if self.quarantine_units() < self.recovery_delay:
            problems.append("attack.quarantine: must be >= recovery.delay")
        if self.monitor_period < 1:
            problems.append("monitor.period: must be >= 1")
        if not (0.0 <= self.monitor_threshold <= 1.0):
            problems.append("monitor.threshold: must be in [0, 1]")
        if self.lbpsvm_epsilon <= 0:
            problems.append("lbpsvm.epsilon: must be > 0")
        if self.jobs < 1:
            problems.append("jobs: must be >= 1")
        if self.attack_target not in ("most-loaded", "random") and self.attack_schedule is None:
            problems.append("attack.target: 'most-loaded', 'random', or set attack.schedule")
        if self.attack_schedule is not None:
            try:
                self.schedule_list()
            except ValueError as exc:
                problems.append(f"attack.schedule: {exc}")
        if problems:
            raise ConfigError("; ".join(problems))

    # ---- derived views -------------------------------------------------

    def policy_list(self) -> list[str]:
        return [p.strip() for p in self.policies.split(",") if p.strip()]

    def schedule_list(self) -> list[tuple[int, int]]:
        """Explicit attacks as (time, node) pairs from 't:node,t:node'."""
        if self.attack_schedule is None:
            return []
        events = []
        for item in self.attack_schedule.split(","):
            t, _, node = item.strip().partition(":")
            events.append((int(t), int(node)))
        return sorted(events)

    def quarantine_units(self) -> int:
        return self.attack_quarantine if self.attack_quarantine is not None else self.attack_every

    def grid(self) -> GridMap:
        return GridMap(rows=self.grid_rows, cols=self.grid_cols, cell_km=self.grid_cell_km)

    def services(self) -> list[ServiceType]:
        """Service catalog: footprint 10 + 2s, delay cap 50 + 10s ms."""
        return [
            ServiceType(
                id=s,
                delay_threshold=50.0 + 10.0 * s,
                resource_cost=10.0 + 2.0 * s,
                instance_capacity=self.service_capacity,
            )
            for s in range(self.services_count)
        ]

    def nodes(self) -> list[EdgeNode]:
        return [
            EdgeNode(id=i, location=loc, capacity=self.node_capacity)
            for i, loc in enumerate(self.grid().node_locations())
        ]

    def mobility_model(self) -> MobilityModel:
        return MobilityModel(
            p_request=self.mobility_p_request,
            speed_min_kmh=self.mobility_speed_min_kmh,
            speed_max_kmh=self.mobility_speed_max_kmh,
            time_unit_s=self.trace_time_unit_s,
        )

    def bbox(self) -> BoundingBox | None:
        if self.trace_bbox is None:
            return None
        parts = [float(v) for v in self.trace_bbox.split(",")]
        if len(parts) != 4:
            raise ConfigError("trace.bbox: expected lat_min,lat_max,lon_min,lon_max")
        return BoundingBox(*parts)

    def trace_path(self) -> str | None:
        if self.dataset.startswith("trace:"):
            return self.dataset.split(":", 1)[1]
        return None

    def to_dict(self) -> dict[str, object]:
        return {FIELD_MAP[f.name]: getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        """Hash of everything that shapes the data, excluding policy/output."""
        payload = {
            k: v
            for k, v in sorted(self.to_dict().items())
            if k not in ("policies", "out", "jobs")
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with changes; accepts dotted keys or field names."""
        merged = self.to_dict()
        for k, v in changes.items():
            dotted = k if k in DEFAULTS else FIELD_MAP.get(k)
            if dotted is None:
                raise ConfigError(f"unknown config key {k!r}")
            merged[dotted] = v
        cfg = ExperimentConfig(**{KEY_MAP[k]: v for k, v in merged.items()})
        cfg.validate()
        return cfg
