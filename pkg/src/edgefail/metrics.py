"""Delay accounting, edge load factor, and Jain's fairness index.

Queue waiting time follows an M/D/1 overload model: an instance with
processing capacity C builds no queue while its arrival stays at or
below C; past that, the backlog lam' = arrival - C waits
lam' / (2C(C - lam')) time units, diverging as arrival approaches 2C.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SaturationError
from .model import SimPhase

# Default distance of clamped arrivals from the 2C pole, matching the
# solver's queue-domain guard.
QUEUE_GUARD = 1e-6


def queue_delay(arrival: float, capacity: float, ms_per_unit: float = 1.0) -> float:
    """Waiting time for an instance with ``arrival`` vehicles on capacity C.

    Returns raw time units by default; pass ``ms_per_unit`` to convert.

    Raises:
        SaturationError: when arrival >= 2C, where the model diverges.
    """
    if capacity <= 0:
        raise ValueError("capacity must be > 0")
    if arrival < 0:
        raise ValueError("arrival must be >= 0")
    if arrival >= 2.0 * capacity:
        raise SaturationError(
            f"arrival {arrival:.6g} >= 2*capacity {2 * capacity:.6g}: queue model diverges"
        )
    if arrival <= capacity:
        return 0.0
    backlog = arrival - capacity
    return ms_per_unit * backlog / (2.0 * capacity * (capacity - backlog))


def service_delay(
    loads,
    delays,
    capacity: float,
    ms_per_unit: float = 1000.0,
    saturation: str = "clamp",
) -> float:
    """Load-weighted per-vehicle delay of one service across its instances.

    ``loads[e]`` vehicles are served at node e whose propagation delay is
    ``delays[e]`` ms; each instance adds its own queue waiting time.  With
    zero vehicles the delay is defined as 0.

    ``saturation`` controls arrivals at or past the 2C pole: "clamp"
    evaluates just inside the pole (a huge but finite penalty), "raise"
    propagates SaturationError.
    """
    loads = np.asarray(loads, dtype=float)
    delays = np.asarray(delays, dtype=float)
    total = float(loads.sum())
    if total <= 0:
        return 0.0
    acc = 0.0
    for load, d in zip(loads, delays):
        if load <= 0:
            continue
        arrival = float(load)
        if arrival >= 2.0 * capacity and saturation == "clamp":
            arrival = 2.0 * capacity - QUEUE_GUARD
        acc += load * (d + queue_delay(arrival, capacity, ms_per_unit))
    return acc / total


def edge_load_factor(added, available) -> np.ndarray:
    """Per-node ELF in percent.

    ``added[e, s]`` is the failover load pushed onto the instance of
    service s at node e and ``available[e, s]`` its remaining capacity
    (C minus the primary load, epsilon-adjusted by the caller when 0).
    A node's ELF is the mean load factor of its instances that received
    load; nodes with no added load report 0.
    """
    added = np.asarray(added, dtype=float)
    avail = np.asarray(available, dtype=float)
    if added.shape != avail.shape:
        raise ValueError("added and available must have the same shape")
    out = np.zeros(added.shape[0])
    for e in range(added.shape[0]):
        hit = added[e] > 0
        if hit.any():
            out[e] = float(np.mean(100.0 * added[e, hit] / avail[e, hit]))
    return out


def average_elf(per_node_elf, loaded_mask=None) -> float:
    """Mean ELF over nodes that took failover load; 0 when none did."""
    elf = np.asarray(per_node_elf, dtype=float)
    mask = elf > 0 if loaded_mask is None else np.asarray(loaded_mask, dtype=bool)
    if not mask.any():
        return 0.0
    return float(elf[mask].mean())


def jain_fairness(values) -> float:
    """Jain's index (sum x)^2 / (n sum x^2); 1 on the all-zero vector."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one value")
    if (x < 0).any():
        raise ValueError("values must be >= 0")
    sq = float((x * x).sum())
    if sq == 0.0:
        return 1.0
    s = float(x.sum())
    return s * s / (x.size * sq)


@dataclass(frozen=True)
class MetricsRecord:
    """One time unit of simulation output."""

    time: int
    state: SimPhase
    per_service_delay: np.ndarray  # ms, per service
    avg_delay: float  # ms, demand-weighted
    elf_per_node: np.ndarray  # percent, 0 for untouched nodes
    avg_elf: float  # percent over nodes with failover load
    fairness: float  # Jain index over failover shares
    q_value: float
    demand_per_service: np.ndarray = field(default=None)  # type: ignore[assignment]
    served_per_service: np.ndarray = field(default=None)  # type: ignore[assignment]
    unserved_per_service: np.ndarray = field(default=None)  # type: ignore[assignment]
    sla_violated: tuple[int, ...] = ()
    degraded_services: tuple[int, ...] = ()
    failover_active: bool = False

    def __post_init__(self):
        for name in ("per_service_delay", "elf_per_node", "demand_per_service",
                     "served_per_service", "unserved_per_service"):
            a = getattr(self, name)
            if a is not None:
                a = np.asarray(a, dtype=float)
                a.flags.writeable = False
                object.__setattr__(self, name, a)
        if not (0.0 < self.fairness <= 1.0 + 1e-12):
            raise ValueError(f"fairness {self.fairness} outside (0, 1]")
        if not (0.0 <= self.q_value <= 1.0):
            raise ValueError(f"q_value {self.q_value} outside [0, 1]")
