"""Core domain types: services, edge nodes, placements, mappings, attacks.

All types are immutable value objects; numpy array fields are marked
read-only after construction so instances can be shared freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import StructuralError


class NodeStatus(enum.Enum):
    HEALTHY = "Healthy"
    ATTACKED = "Attacked"


class SimPhase(enum.Enum):
    """Network state of the discrete-time loop."""

    PRE_ATTACK = "PreAttack"
    ATTACK = "Attack"
    RECOVERED = "Recovered"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ServiceType:
    """One service class: delay bound, footprint, per-instance capacity.

    Attributes:
        id: service index in [0, S).
        delay_threshold: maximum tolerable delay in milliseconds.
        resource_cost: resource units one instance consumes on a node.
        instance_capacity: simultaneous vehicle connections one instance serves.
        demand_rate: vehicles per time unit requesting this service (may be 0).
    """

    id: int
    delay_threshold: float
    resource_cost: float
    instance_capacity: float
    demand_rate: float = 0.0

    def __post_init__(self):
        if self.delay_threshold <= 0:
            raise ValueError(f"service {self.id}: delay_threshold must be > 0")
        if self.resource_cost <= 0:
            raise ValueError(f"service {self.id}: resource_cost must be > 0")
        if self.instance_capacity <= 0:
            raise ValueError(f"service {self.id}: instance_capacity must be > 0")
        if self.demand_rate < 0:
            raise ValueError(f"service {self.id}: demand_rate must be >= 0")


@dataclass(frozen=True)
class EdgeNode:
    """An edge node: position in km, resource budget, attack status."""

    id: int
    location: tuple[float, float]
    capacity: float
    status: NodeStatus = NodeStatus.HEALTHY

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError(f"node {self.id}: capacity must be > 0")
        if not all(math.isfinite(c) for c in self.location):
            raise ValueError(f"node {self.id}: location must be finite")

    @property
    def healthy(self) -> bool:
        return self.status is NodeStatus.HEALTHY

    def with_status(self, status: NodeStatus) -> "EdgeNode":
        return replace(self, status=status)


@dataclass(frozen=True)
class ServiceRequest:
    """One service request: <vehicle, location, time, service>."""

    vehicle: str
    location: tuple[float, float]
    time: int
    service: int

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("request time must be >= 0")


@dataclass(frozen=True)
class PlacementDecision:
    """Which nodes host which service instances.

    ``x[e, s]`` is 1 when node e hosts an active instance of service s,
    ``reserved[e, s]`` marks idle backup instances that carry no primary
    load.  At most one instance of a given service sits on one node, so
    the count of hosting nodes equals the instance count I_s.
    """

    x: np.ndarray
    reserved: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.int64)
        if x.ndim != 2:
            raise StructuralError("placement matrix must be 2-D (nodes x services)")
        if (x < 0).any() or (x > 1).any():
            raise ValueError("placement entries must be 0/1")
        reserved = self.reserved
        if reserved is None:
            reserved = np.zeros_like(x)
        else:
            reserved = np.asarray(reserved, dtype=np.int64)
            if reserved.shape != x.shape:
                raise StructuralError("reserved matrix shape must match x")
            if (reserved < 0).any() or (reserved > 1).any():
                raise ValueError("reserved entries must be 0/1")
        if ((x + reserved) > 1).any():
            raise ValueError("a node cannot host two instances of one service")
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "reserved", _freeze(reserved))

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_services(self) -> int:
        return self.x.shape[1]

    def nodes_hosting(self, service: int, include_reserved: bool = False) -> list[int]:
        m = self.x[:, service] > 0
        if include_reserved:
            m = m | (self.reserved[:, service] > 0)
        return [int(e) for e in np.flatnonzero(m)]

    def reserved_nodes(self, service: int) -> list[int]:
        return [int(e) for e in np.flatnonzero(self.reserved[:, service] > 0)]

    def services_on(self, node: int, include_reserved: bool = False) -> list[int]:
        m = self.x[node] > 0
        if include_reserved:
            m = m | (self.reserved[node] > 0)
        return [int(s) for s in np.flatnonzero(m)]

    def instance_counts(self) -> np.ndarray:
        """Active instances per service, I_s."""
        return self.x.sum(axis=0)

    def resource_usage(self, services: list[ServiceType]) -> np.ndarray:
        """Resource units consumed per node, counting reserved instances."""
        costs = np.array([s.resource_cost for s in services], dtype=float)
        return (self.x + self.reserved) @ costs

    def with_instance(self, node: int, service: int, reserved: bool = False) -> "PlacementDecision":
        x = np.array(self.x)
        r = np.array(self.reserved)
        (r if reserved else x)[node, service] = 1
        return PlacementDecision(x=x, reserved=r)

    def without_node(self, node: int) -> "PlacementDecision":
        x = np.array(self.x)
        r = np.array(self.reserved)
        x[node] = 0
        r[node] = 0
        return PlacementDecision(x=x, reserved=r)

    def promote_reserved(self, node: int, service: int) -> "PlacementDecision":
        if self.reserved[node, service] != 1:
            raise ValueError(f"no reserved instance of service {service} on node {node}")
        x = np.array(self.x)
        r = np.array(self.reserved)
        r[node, service] = 0
        x[node, service] = 1
        return PlacementDecision(x=x, reserved=r)


@dataclass(frozen=True)
class PrimaryMapping:
    """Vehicles served per (node, service) in normal operation: gamma[e, s]."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 2:
            raise StructuralError("gamma must be 2-D (nodes x services)")
        if (g < 0).any() or not np.isfinite(g).all():
            raise ValueError("gamma entries must be finite and >= 0")
        object.__setattr__(self, "gamma", _freeze(g))

    def load_per_node(self) -> np.ndarray:
        return self.gamma.sum(axis=1)

    def demand_per_service(self) -> np.ndarray:
        return self.gamma.sum(axis=0)


@dataclass(frozen=True)
class SecondaryMapping:
    """Failover assignment of one attacked (node, service) pair.

    ``beta[i]`` vehicles are re-homed onto ``candidates[i]``; the betas
    sum to the affected vehicle count at the source node.
    """

    source_node: int
    service: int
    candidates: tuple[int, ...]
    beta: np.ndarray
    affected: float

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.shape != (len(self.candidates),):
            raise StructuralError("beta length must match candidates")
        if (b < 0).any():
            raise ValueError("beta entries must be >= 0")
        if abs(float(b.sum()) - self.affected) > 1e-9 * max(1.0, abs(self.affected)):
            raise ValueError("beta must sum to the affected vehicle count")
        object.__setattr__(self, "beta", _freeze(b))


@dataclass(frozen=True)
class DelayModel:
    """Average propagation delay in ms for service s at node e: d[e, s]."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2:
            raise StructuralError("delay matrix must be 2-D (nodes x services)")
        if (d < 0).any() or not np.isfinite(d).all():
            raise ValueError("delay entries must be finite and >= 0")
        object.__setattr__(self, "d", _freeze(d))


@dataclass(frozen=True)
class AttackEvent:
    """A single-node outage: onset time, target node, units until recovery."""

    time: int
    target: int
    duration: int = 1

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("attack duration must be >= 1 time unit")


@dataclass(frozen=True)
class PlacementReport:
    """Per-invariant outcome of a placement validation."""

    resource_ok: tuple[bool, ...]
    redundancy_ok: tuple[bool, ...]
    messages: tuple[str, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return all(self.resource_ok) and all(self.redundancy_ok)


def validate_placement(
    p: PlacementDecision,
    nodes: list[EdgeNode],
    services: list[ServiceType],
    require_redundancy: bool = True,
) -> PlacementReport:
    """Check per-node resource feasibility and per-service redundancy.

    Redundancy requires instances of every service on at least two
    distinct nodes; it can be waived for post-attack partial states.

    Raises:
        StructuralError: when the placement shape does not match the
            node/service lists.
    """
    if p.x.shape != (len(nodes), len(services)):
        raise StructuralError(
            f"placement is {p.x.shape}, expected ({len(nodes)}, {len(services)})"
        )
    usage = p.resource_usage(services)
    resource_ok = tuple(usage[e] <= nodes[e].capacity + 1e-9 for e in range(len(nodes)))
    counts = p.instance_counts()
    redundancy_ok = tuple(
        True if not require_redundancy else int(counts[s]) >= 2 for s in range(len(services))
    )
    messages = []
    for e, ok in enumerate(resource_ok):
        if not ok:
            messages.append(
                f"node {e}: resource use {usage[e]:.3f} exceeds capacity {nodes[e].capacity:.3f}"
            )
    for s, ok in enumerate(redundancy_ok):
        if not ok:
            messages.append(f"service {s}: hosted on {int(counts[s])} node(s), needs >= 2")
    return PlacementReport(resource_ok, redundancy_ok, tuple(messages))


def round_preserving_sum(values) -> np.ndarray:
    """Round a non-negative vector to integers, preserving the rounded sum.

    Largest-remainder rule: floor everything, then hand out the missing
    units to the largest fractional parts (ties to the lowest index).
    Used only when reporting vehicle counts; solvers stay real-valued.
    """
    v = np.asarray(values, dtype=float)
    if (v < 0).any():
        raise ValueError("values must be >= 0")
    total = int(round(float(v.sum())))
    floors = np.floor(v).astype(np.int64)
    missing = total - int(floors.sum())
    if missing <= 0:
        return floors
    remainders = v - floors
    order = np.lexsort((np.arange(len(v)), -remainders))
    out = np.array(floors)
    out[order[:missing]] += 1
    return out
