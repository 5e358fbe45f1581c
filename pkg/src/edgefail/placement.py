"""Service placement: initial siting, backup reservation, post-attack recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .model import (
    DelayModel,
    EdgeNode,
    PlacementDecision,
    ServiceType,
    validate_placement,
)

# Backtracking budget for the placement search; the default scenario
# (9 nodes, 8 services, 3 instances) never gets near it.
MAX_SEARCH_STATES = 200_000


def place_services(
    services: list[ServiceType],
    nodes: list[EdgeNode],
    delay: DelayModel,
    instances_per_service: int | list[int] = 3,
) -> PlacementDecision:
    """Greedy-by-delay siting with capacity backtracking.

    Each service gets its instances on distinct healthy nodes, picked in
    ascending propagation-delay order; services are processed from the
    most resource-hungry down so big footprints are placed while room is
    plentiful.  When a greedy branch runs out of room the search
    backtracks to the previous choice.

    Raises:
        InfeasibleError: when the aggregate budget cannot fit all
            instances, or the search exhausts its state budget.
    """
    E, S = len(nodes), len(services)
    if isinstance(instances_per_service, int):
        counts = [instances_per_service] * S
    else:
        counts = list(instances_per_service)
        if len(counts) != S:
            raise ValueError("instances_per_service must match the service count")
    if any(c < 2 for c in counts):
        raise ValueError("each service needs at least 2 instances (redundancy)")

    healthy = [n.id for n in nodes if n.healthy]
    total_need = sum(counts[s] * services[s].resource_cost for s in range(S))
    total_have = sum(nodes[e].capacity for e in healthy)
    if total_need > total_have + 1e-9:
        raise InfeasibleError(
            f"aggregate demand {total_need:.6g} resource units exceeds "
            f"healthy capacity {total_have:.6g}"
        )

    order = sorted(range(S), key=lambda s: (-services[s].resource_cost, s))
    residual = {e: nodes[e].capacity for e in healthy}
    chosen: dict[int, list[int]] = {}
    states = 0

    def prefs(s: int) -> list[int]:
        return sorted(healthy, key=lambda e: (delay.d[e, s], e))

    def search(idx: int) -> bool:
        nonlocal states
        if idx == len(order):
            return True
        s = order[idx]
        cost = services[s].resource_cost
        options = [e for e in prefs(s) if residual[e] >= cost - 1e-9]
        need = counts[s]
        if len(options) < need:
            return False

        def pick(start: int, taken: list[int]) -> bool:
            nonlocal states
            if len(taken) == need:
                chosen[s] = list(taken)
                if search(idx + 1):
                    return True
                chosen.pop(s)
                return False
            if len(options) - start < need - len(taken):
                return False
            for j in range(start, len(options)):
                states += 1
                if states > MAX_SEARCH_STATES:
                    raise InfeasibleError("placement search exhausted its budget")
                e = options[j]
                residual[e] -= cost
                taken.append(e)
                if pick(j + 1, taken):
                    return True
                taken.pop()
                residual[e] += cost
            return False

        return pick(0, [])

    if not search(0):
        raise InfeasibleError("no feasible placement found for the given budgets")

    x = np.zeros((E, S), dtype=np.int64)
    for s, hosts in chosen.items():
        for e in hosts:
            x[e, s] = 1
    decision = PlacementDecision(x=x)
    report = validate_placement(decision, nodes, services)
    assert report.ok, report.messages
    return decision


def reserve_backup(
    p: PlacementDecision,
    services: list[ServiceType],
    nodes: list[EdgeNode],
    only=None,
) -> PlacementDecision:
    """Add one idle backup instance per service type.

    The backup lands on the healthy node with the most residual capacity
    that does not already host the service (ties to the lowest index).
    Reserved instances consume node resources immediately but carry no
    primary load.  Existing instances are never moved or removed.
    ``only`` restricts reservation to a subset of service ids.

    Raises:
        InfeasibleError: when some service has no node with room left.
    """
    out = p
    wanted = range(len(services)) if only is None else only
    for s in sorted(wanted, key=lambda s: (-services[s].resource_cost, s)):
        cost = services[s].resource_cost
        usage = out.resource_usage(services)
        options = [
            n.id
            for n in nodes
            if n.healthy
            and out.x[n.id, s] == 0
            and out.reserved[n.id, s] == 0
            and n.capacity - usage[n.id] >= cost - 1e-9
        ]
        if not options:
            raise InfeasibleError(f"service {s}: no residual capacity for a backup instance")
        best = max(options, key=lambda e: (nodes[e].capacity - usage[e], -e))
        out = out.with_instance(best, s, reserved=True)
    return out


@dataclass(frozen=True)
class RecoveryResult:
    placement: PlacementDecision
    unrecovered: tuple[int, ...]

    @property
    def complete(self) -> bool:
        return not self.unrecovered


def recover_placement(
    p: PlacementDecision,
    attacked: int,
    services_lost: list[int],
    services: list[ServiceType],
    nodes: list[EdgeNode],
    delay: DelayModel,
) -> RecoveryResult:
    """Re-instantiate lost instances on healthy nodes.

    Every lost instance goes to a healthy node that does not currently
    host that service (neither active nor reserved), choosing minimal
    propagation delay with ties to the lowest node index; bigger
    footprints are recovered first.  The attacked node ends up hosting
    nothing.  Services with no room anywhere are reported back rather
    than raising.
    """
    out = p.without_node(attacked)
    unrecovered: list[int] = []
    for s in sorted(services_lost, key=lambda s: (-services[s].resource_cost, s)):
        cost = services[s].resource_cost
        usage = out.resource_usage(services)
        options = [
            n.id
            for n in nodes
            if n.healthy
            and n.id != attacked
            and out.x[n.id, s] == 0
            and out.reserved[n.id, s] == 0
            and n.capacity - usage[n.id] >= cost - 1e-9
        ]
        if not options:
            unrecovered.append(s)
            continue
        best = min(options, key=lambda e: (delay.d[e, s], e))
        out = out.with_instance(best, s)
    return RecoveryResult(placement=out, unrecovered=tuple(sorted(unrecovered)))
