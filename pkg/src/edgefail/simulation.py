"""Discrete-time failure/recovery simulation.

The loop walks a three-phase state machine per attack cycle:

* PreAttack -- demand is served by the primary mapping; failover splits
  for every possible single-node outage are kept fresh each unit, so an
  attack at time t uses mappings computed from the data of t-1.
* Attack -- the stored split for the hit node activates within the same
  unit (zero-gap failover); the previous unit's mapping acts as routing
  proportions rescaled to the current demand so no request is dropped.
* Recovered -- lost instances are re-instantiated elsewhere after the
  recovery delay and normal serving resumes on the new topology.  The
  attacked node returns to service after a quarantine, by default the
  remainder of the attack cycle.

A quality monitor stands in for a learned critic: every few units it
scores recent delays against the per-service caps and, when the score
drops below a threshold, triggers a placement re-optimization.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .errors import ConcurrentAttackError, InfeasibleError, NoCandidateError
from .metrics import MetricsRecord, average_elf, edge_load_factor, jain_fairness, service_delay
from .mobility import derive_delay_matrix, derive_demand
from .model import (
    AttackEvent,
    DelayModel,
    EdgeNode,
    NodeStatus,
    PlacementDecision,
    PrimaryMapping,
    SecondaryMapping,
    SimPhase,
)
from .placement import place_services, recover_placement, reserve_backup
from .solvers import build_lb_psvm, solve_lb_psvm, solve_psvm

logger = logging.getLogger(__name__)


@dataclass
class QualityMonitor:
    """Delay-based stand-in for a learned critic.

    Scores sit in [0, 1]: 1 when recent delays are negligible, 0 once
    they reach the per-service caps.  Evaluated every ``period`` units;
    scores below ``threshold`` trigger re-optimization.
    """

    thresholds: np.ndarray
    threshold: float = 0.5
    period: int = 5
    q_value: float = 1.0
    window: deque = field(default_factory=deque)

    def __post_init__(self):
        self.window = deque(self.window, maxlen=self.period)


def evaluate_quality(monitor: QualityMonitor, records) -> float:
    """Mean over services of clip(1 - mean window delay / cap, 0, 1)."""
    arrs = [
        np.asarray(getattr(r, "per_service_delay", r), dtype=float) for r in records
    ]
    if not arrs:
        raise ValueError("need at least one record")
    mean_delay = np.mean(arrs, axis=0)
    return float(np.mean(np.clip(1.0 - mean_delay / monitor.thresholds, 0.0, 1.0)))


@dataclass
class SimulationState:
    nodes: list
    monitor: QualityMonitor
    clock: int = 0
    placement: PlacementDecision | None = None
    primary: PrimaryMapping | None = None
    primary_demand: np.ndarray | None = None
    delay: DelayModel | None = None
    proactive: dict = field(default_factory=dict)
    active_attack: AttackEvent | None = None
    phase: SimPhase = SimPhase.PRE_ATTACK
    history: list = field(default_factory=list)
    recover_at: int | None = None
    heal_at: int | None = None
    pending_reopt: bool = False

    def healthy_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.healthy]


class Simulation:
    """Single-policy simulation owning all mutable state."""

    def __init__(self, cfg: ExperimentConfig, policy: str):
        if policy not in ("lb-psvm", "psvm", "br"):
            raise ValueError(f"unknown policy {policy!r}")
        self.cfg = cfg
        self.policy = policy
        self.services = cfg.services()
        self.capacity = cfg.service_capacity
        self.num_services = len(self.services)
        self.thresholds = np.array([s.delay_threshold for s in self.services])
        self.grid_center = cfg.grid().center()
        self.target_rng = np.random.default_rng([cfg.seed, 0xA77AC])
        self.schedule = {t: e for t, e in cfg.schedule_list()}
        self.state = SimulationState(
            nodes=cfg.nodes(),
            monitor=QualityMonitor(
                thresholds=self.thresholds,
                threshold=cfg.monitor_threshold,
                period=cfg.monitor_period,
            ),
        )

    # ---- driver ---------------------------------------------------------

    def run(self, requests_by_unit) -> list[MetricsRecord]:
        """Advance the clock over the request stream; clock is 1-based."""
        st = self.state
        for t, requests in enumerate(requests_by_unit, start=1):
            if st.active_attack is not None and st.recover_at == t:
                self.recover(t)
            if st.active_attack is not None and st.heal_at == t:
                self.heal(t)
            target = self._scheduled_target(t)
            if target is not None:
                self.inject_attack(target, t)
            self.step(requests, t)
        return st.history

    def _scheduled_target(self, t: int) -> int | None:
        if self.state.active_attack is not None:
            return None
        if self.schedule:
            return self.schedule.get(t)
        if t % self.cfg.attack_every != 0:
            return None
        return self._pick_target()

    def _pick_target(self) -> int | None:
        st = self.state
        if st.placement is None:
            return None
        hosting = [
            e for e in st.healthy_ids()
            if st.placement.services_on(e, include_reserved=True)
        ]
        if not hosting:
            return None
        if self.cfg.attack_target == "random":
            return int(self.target_rng.choice(hosting))
        loads = st.primary.load_per_node() if st.primary is not None else np.zeros(len(st.nodes))
        return max(hosting, key=lambda e: (loads[e], -e))

    # ---- state transitions ----------------------------------------------

    def inject_attack(self, target: int, t: int) -> bool:
        """Mark the target down and activate its stored failover splits.

        Returns False (a warned no-op) when the target hosts nothing.

        Raises:
            ConcurrentAttackError: if an attack is already active.
        """
        st = self.state
        if st.active_attack is not None:
            raise ConcurrentAttackError(
                f"attack on node {target} at t={t} while node "
                f"{st.active_attack.target} is still down"
            )
        if st.placement is None or not st.placement.services_on(target, include_reserved=True):
            logger.warning("attack at t=%d on node %d hosting nothing: no-op", t, target)
            return False
        st.nodes[target] = st.nodes[target].with_status(NodeStatus.ATTACKED)
        st.active_attack = AttackEvent(time=t, target=target, duration=self.cfg.recovery_delay)
        st.phase = SimPhase.ATTACK
        st.recover_at = t + self.cfg.recovery_delay
        st.heal_at = t + self.cfg.quarantine_units()
        return True

    def recover(self, t: int) -> None:
        """Re-instantiate the attacked node's instances elsewhere."""
        st = self.state
        target = st.active_attack.target
        lost = st.placement.services_on(target)
        reserved_lost = [
            s for s in range(self.num_services) if st.placement.reserved[target, s]
        ]
        if self.policy == "br" and self.cfg.br_enabled:
            plc = st.placement.without_node(target)
            srp_needed = []
            for s in lost:
                promoted = self._promote_reserved(plc, s)
                if promoted is None:
                    srp_needed.append(s)
                else:
                    plc = promoted
            if srp_needed:
                result = recover_placement(
                    plc, target, srp_needed, self.services, st.nodes, st.delay
                )
                plc = result.placement
                if result.unrecovered:
                    logger.warning("t=%d: unrecovered services %s", t, result.unrecovered)
            # best effort: keep one idle backup per service for the next failure
            for s in sorted(set(lost) | set(reserved_lost)):
                if not any(plc.reserved[e, s] for e in st.healthy_ids()):
                    try:
                        plc = reserve_backup(plc, self.services, st.nodes, only=[s])
                    except InfeasibleError:
                        logger.warning("t=%d: no room to re-reserve service %d", t, s)
        else:
            result = recover_placement(
                st.placement, target, lost, self.services, st.nodes, st.delay
            )
            plc = result.placement
            if result.unrecovered:
                logger.warning("t=%d: unrecovered services %s", t, result.unrecovered)
        st.placement = plc
        st.phase = SimPhase.RECOVERED
        st.recover_at = None
        st.proactive.clear()

    def _promote_reserved(self, plc: PlacementDecision, service: int):
        candidates = [e for e in plc.reserved_nodes(service) if self.state.nodes[e].healthy]
        if not candidates:
            return None
        d = self.state.delay.d
        best = min(candidates, key=lambda e: (d[e, service], e))
        return plc.promote_reserved(best, service)

    def heal(self, t: int) -> None:
        """End the quarantine: the node is placeable again."""
        st = self.state
        target = st.active_attack.target
        st.nodes[target] = st.nodes[target].with_status(NodeStatus.HEALTHY)
        st.active_attack = None
        st.heal_at = None
        if st.phase is SimPhase.RECOVERED:
            st.phase = SimPhase.PRE_ATTACK

    # ---- per-unit work ----------------------------------------------------

    def step(self, requests, t: int) -> MetricsRecord:
        """Serve one time unit's requests and append a metrics record."""
        st = self.state
        lam = derive_demand(requests, self.num_services)
        d = derive_delay_matrix(
            requests,
            st.nodes,
            self.num_services,
            alpha_ms_per_km=self.cfg.delay_alpha_ms_per_km,
            base_ms=self.cfg.delay_base_ms,
            fallback_point=self.grid_center,
        )
        if st.phase is not SimPhase.ATTACK and (st.placement is None or st.pending_reopt):
            self._place(d)
            st.pending_reopt = False
        if st.phase is SimPhase.ATTACK:
            loads, added, unserved, cand_by_service = self._attack_serve(lam, d)
        else:
            gamma = solve_primary_mapping_checked(st.placement, lam, d, self.capacity, t)
            st.primary = gamma
            st.primary_demand = lam
            loads = np.array(gamma.gamma)
            added = np.zeros_like(loads)
            unserved = np.zeros(self.num_services)
            cand_by_service = {}
            self._refresh_proactive(gamma, d)
        st.delay = d
        record = self._build_record(t, lam, d, loads, added, unserved, cand_by_service)
        st.clock = t
        st.history.append(record)
        return record

    def _place(self, d: DelayModel) -> None:
        st = self.state
        plc = place_services(
            self.services, st.nodes, d, self.cfg.placement_instances_per_service
        )
        if self.policy == "br" and self.cfg.br_enabled:
            plc = reserve_backup(plc, self.services, st.nodes)
        st.placement = plc
        st.proactive.clear()

    def _refresh_proactive(self, gamma: PrimaryMapping, d: DelayModel) -> None:
        """Recompute failover splits for every possible single-node outage."""
        st = self.state
        st.proactive.clear()
        healthy = st.healthy_ids()
        for e in healthy:
            for s in st.placement.services_on(e):
                st.proactive[(e, s)] = self._policy_secondary(gamma, e, s, d, healthy)

    def _policy_secondary(
        self, gamma: PrimaryMapping, target: int, service: int, d: DelayModel, healthy
    ) -> SecondaryMapping | None:
        st = self.state
        try:
            if self.policy == "br" and self.cfg.br_enabled:
                reserved = [
                    e for e in st.placement.reserved_nodes(service)
                    if e != target and st.nodes[e].healthy
                ]
                if reserved:
                    best = min(reserved, key=lambda e: (d.d[e, service], e))
                    affected = float(gamma.gamma[target, service])
                    return SecondaryMapping(
                        source_node=target,
                        service=service,
                        candidates=(best,),
                        beta=np.array([affected]),
                        affected=affected,
                    )
                return solve_psvm(gamma, st.placement, target, service, d, healthy)
            if self.policy in ("psvm", "br"):
                # br without reserves (disabled or exhausted) degrades to psvm
                return solve_psvm(gamma, st.placement, target, service, d, healthy)
            problem = build_lb_psvm(
                gamma,
                st.placement,
                target,
                service,
                d,
                self.capacity,
                self.services[service].delay_threshold,
                k1=self.cfg.lbpsvm_k1,
                k2=self.cfg.lbpsvm_k2,
                epsilon=self.cfg.lbpsvm_epsilon,
                healthy=healthy,
            )
            return solve_lb_psvm(
                problem,
                max_iters=self.cfg.solver_max_iters,
                kkt_tol=self.cfg.lbpsvm_kkt_tol,
            ).to_secondary()
        except NoCandidateError:
            return None
        except InfeasibleError as exc:
            logger.warning("proactive split for node %d service %d infeasible: %s",
                           target, service, exc)
            return None

    def _attack_serve(self, lam: np.ndarray, d: DelayModel):
        """Serve via stored splits; previous proportions scaled to today."""
        st = self.state
        target = st.active_attack.target
        E = len(st.nodes)
        loads = np.zeros((E, self.num_services))
        added = np.zeros_like(loads)
        unserved = np.zeros(self.num_services)
        cand_by_service: dict[int, tuple[int, ...]] = {}
        healthy_placement = st.placement.without_node(target)
        for s in range(self.num_services):
            if lam[s] <= 0:
                continue
            prev = st.primary_demand[s] if st.primary_demand is not None else 0.0
            if st.primary is None or prev <= 0:
                served, left = _fill_cheapest(
                    healthy_placement, s, float(lam[s]), d, self.capacity
                )
                loads[:, s] = served
                unserved[s] = left
                continue
            ratio = float(lam[s]) / float(prev)
            scaled = st.primary.gamma[:, s] * ratio
            affected = float(scaled[target])
            scaled[target] = 0.0
            loads[:, s] = scaled
            if affected <= 0:
                continue
            mapping = st.proactive.get((target, s))
            if mapping is None or mapping.affected <= 0:
                unserved[s] = affected
                continue
            share = affected / mapping.affected
            for i, e in enumerate(mapping.candidates):
                added[e, s] += mapping.beta[i] * share
            cand_by_service[s] = mapping.candidates
        return loads, added, unserved, cand_by_service

    def _build_record(
        self, t, lam, d, loads, added, unserved, cand_by_service
    ) -> MetricsRecord:
        st = self.state
        S = self.num_services
        per_service = np.zeros(S)
        for s in range(S):
            arrivals = loads[:, s] + added[:, s]
            per_service[s] = service_delay(
                arrivals, d.d[:, s], self.capacity, ms_per_unit=self.cfg.queue_ms_per_unit
            )
        total_lam = float(lam.sum())
        avg_delay = float((lam * per_service).sum() / total_lam) if total_lam > 0 else 0.0

        avail = np.maximum(self.capacity - loads, self.cfg.lbpsvm_epsilon)
        elf_per_node = edge_load_factor(added, avail)
        loaded_nodes = added.sum(axis=1) > 0
        avg_elf = average_elf(elf_per_node, loaded_nodes)

        jains = []
        for s, candidates in sorted(cand_by_service.items()):
            if added[:, s].sum() <= 0:
                continue
            shares = [added[e, s] / avail[e, s] for e in candidates]
            jains.append(jain_fairness(shares))
        fairness = float(np.mean(jains)) if jains else 1.0

        st.monitor.window.append(np.array(per_service))
        if t % st.monitor.period == 0:
            q = evaluate_quality(st.monitor, list(st.monitor.window))
            st.monitor.q_value = q
            if q < st.monitor.threshold and st.phase is not SimPhase.ATTACK:
                st.pending_reopt = True

        counts = st.placement.instance_counts() if st.placement is not None else np.ones(S)
        degraded = tuple(int(s) for s in range(S) if counts[s] == 0)
        sla = tuple(int(s) for s in range(S) if per_service[s] > self.thresholds[s])
        return MetricsRecord(
            time=t,
            state=st.phase,
            per_service_delay=per_service,
            avg_delay=avg_delay,
            elf_per_node=elf_per_node,
            avg_elf=avg_elf,
            fairness=fairness,
            q_value=st.monitor.q_value,
            demand_per_service=lam,
            served_per_service=loads.sum(axis=0) + added.sum(axis=0),
            unserved_per_service=unserved,
            sla_violated=sla,
            degraded_services=degraded,
            failover_active=bool(added.sum() > 0),
        )


def solve_primary_mapping_checked(placement, lam, d, capacity, t):
    from .solvers import solve_primary_mapping

    try:
        return solve_primary_mapping(placement, lam, d, capacity)
    except InfeasibleError as exc:
        raise InfeasibleError(f"t={t}: {exc}") from exc


def _fill_cheapest(placement, service, demand, d, capacity):
    """Capacity-capped cheapest-first fill; returns (per-node load, leftover)."""
    served = np.zeros(placement.num_nodes)
    remaining = demand
    for e in sorted(placement.nodes_hosting(service), key=lambda e: (d.d[e, service], e)):
        if remaining <= 0:
            break
        take = min(remaining, capacity)
        served[e] = take
        remaining -= take
    return served, max(0.0, remaining)
