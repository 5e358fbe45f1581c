import numpy as np
import pytest

from edgefail.errors import InfeasibleError
from edgefail.mobility import GridMap, derive_delay_matrix, generate_synthetic
from edgefail.model import (
    DelayModel,
    EdgeNode,
    NodeStatus,
    PlacementDecision,
    ServiceType,
    validate_placement,
)
from edgefail.placement import place_services, recover_placement, reserve_backup

GRID = GridMap()


def make_services(costs):
    return [
        ServiceType(id=i, delay_threshold=50.0 + 10 * i, resource_cost=c, instance_capacity=30.0)
        for i, c in enumerate(costs)
    ]


def make_nodes(n, capacity=100.0):
    return [EdgeNode(id=i, location=(float(i), 0.0), capacity=capacity) for i in range(n)]


def uniform_delay(E, S, value=1.0):
    return DelayModel(d=np.full((E, S), value))


def grid_scenario(seed=0):
    nodes = [
        EdgeNode(id=i, location=loc, capacity=100.0)
        for i, loc in enumerate(GRID.node_locations())
    ]
    services = make_services([10.0 + 2 * s for s in range(8)])
    units = generate_synthetic(seed=seed, vehicles=100, grid=GRID, horizon=1)
    delay = derive_delay_matrix(units[0], nodes, 8)
    return nodes, services, delay


class TestPlaceServices:
    def test_two_nodes_forced_spread(self):
        nodes = make_nodes(2)
        services = make_services([10.0])
        p = place_services(services, nodes, uniform_delay(2, 1), instances_per_service=2)
        assert p.x[:, 0].tolist() == [1, 1]

    def test_default_scenario_feasible(self):
        nodes, services, delay = grid_scenario()
        p = place_services(services, nodes, delay, instances_per_service=3)
        report = validate_placement(p, nodes, services)
        assert report.ok
        assert (p.instance_counts() == 3).all()
        assert (p.resource_usage(services) <= 100.0).all()

    def test_small_node_hosts_nothing(self):
        nodes = [
            EdgeNode(id=0, location=(0, 0), capacity=100.0),
            EdgeNode(id=1, location=(1, 0), capacity=100.0),
            EdgeNode(id=2, location=(2, 0), capacity=5.0),
        ]
        services = make_services([10.0, 12.0])
        p = place_services(services, nodes, uniform_delay(3, 2), instances_per_service=2)
        assert p.x[2].sum() == 0

    def test_prefers_low_delay_nodes(self):
        nodes = make_nodes(3)
        services = make_services([10.0])
        d = DelayModel(d=np.array([[9.0], [2.0], [5.0]]))
        p = place_services(services, nodes, d, instances_per_service=2)
        assert p.x[:, 0].tolist() == [0, 1, 1]

    def test_aggregate_infeasibility(self):
        nodes = make_nodes(2, capacity=25.0)
        services = make_services([10.0, 12.0])
        with pytest.raises(InfeasibleError, match="aggregate"):
            place_services(services, nodes, uniform_delay(2, 2), instances_per_service=3)

    def test_backtracking_finds_tight_fit(self):
        # greedy-by-delay alone would strand the big service: both cheap
        # nodes must keep room for one 20-unit instance each
        nodes = make_nodes(3, capacity=30.0)
        services = make_services([20.0, 10.0])
        d = DelayModel(d=np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 300.0]]))
        p = place_services(services, nodes, d, instances_per_service=2)
        assert validate_placement(p, nodes, services).ok

    def test_attacked_nodes_excluded(self):
        nodes = make_nodes(3)
        nodes[0] = nodes[0].with_status(NodeStatus.ATTACKED)
        services = make_services([10.0])
        p = place_services(services, nodes, uniform_delay(3, 1), instances_per_service=2)
        assert p.x[0, 0] == 0

    def test_redundancy_precondition(self):
        with pytest.raises(ValueError, match="at least 2"):
            place_services(make_services([10.0]), make_nodes(2), uniform_delay(2, 1),
                           instances_per_service=1)


class TestReserveBackup:
    def test_only_legal_spot(self):
        nodes = make_nodes(3)
        services = make_services([10.0])
        p = PlacementDecision(x=np.array([[1], [1], [0]]))
        q = reserve_backup(p, services, nodes)
        assert q.reserved[2, 0] == 1
        assert np.array_equal(q.x, p.x)

    def test_default_scenario_costs_extra_136_units(self):
        nodes, services, delay = grid_scenario()
        p = place_services(services, nodes, delay, instances_per_service=3)
        q = reserve_backup(p, services, nodes)
        extra = q.resource_usage(services).sum() - p.resource_usage(services).sum()
        assert extra == pytest.approx(sum(s.resource_cost for s in services))
        assert extra == pytest.approx(136.0)
        assert (q.reserved.sum(axis=0) == 1).all()
        assert validate_placement(q, nodes, services).ok

    def test_superset_of_input(self):
        nodes, services, delay = grid_scenario()
        p = place_services(services, nodes, delay, instances_per_service=3)
        q = reserve_backup(p, services, nodes)
        assert (q.x >= p.x).all()

    def test_full_nodes_raise(self):
        nodes = make_nodes(2, capacity=20.0)
        services = make_services([10.0])
        p = PlacementDecision(x=np.array([[1], [1]]))
        # residual is 10 per node but both already host the service
        with pytest.raises(InfeasibleError):
            reserve_backup(p, services, nodes)

    def test_only_subset(self):
        nodes = make_nodes(4)
        services = make_services([10.0, 12.0])
        p = PlacementDecision(x=np.array([[1, 1], [1, 1], [0, 0], [0, 0]]))
        q = reserve_backup(p, services, nodes, only=[1])
        assert q.reserved[:, 0].sum() == 0
        assert q.reserved[:, 1].sum() == 1


class TestRecoverPlacement:
    def attack(self, nodes, target):
        out = list(nodes)
        out[target] = out[target].with_status(NodeStatus.ATTACKED)
        return out

    def test_three_lost_services_reinstantiated(self):
        # node 0 under attack hosting three services; replacements land on
        # nodes that do not already host them
        nodes = make_nodes(4)
        services = make_services([10.0, 12.0, 14.0])
        x = np.array([
            [1, 1, 1],
            [1, 1, 0],
            [1, 0, 1],
            [0, 1, 1],
        ])
        p = PlacementDecision(x=x)
        d = uniform_delay(4, 3)
        result = recover_placement(p, 0, [0, 1, 2], services, self.attack(nodes, 0), d)
        assert result.complete
        q = result.placement
        assert q.x[0].sum() == 0
        for s in range(3):
            assert q.x[:, s].sum() == x[:, s].sum()  # instance count restored
            assert validate_placement(q, nodes, services).redundancy_ok[s]
        # the replacement node did not host the service before
        for s in range(3):
            new_hosts = set(np.flatnonzero(q.x[:, s])) - set(np.flatnonzero(x[1:, s]) + 1)
            assert len(new_hosts) == 1

    def test_forced_single_option(self):
        nodes = make_nodes(3, capacity=10.0)
        services = make_services([10.0])
        p = PlacementDecision(x=np.array([[1], [1], [0]]))
        d = uniform_delay(3, 1)
        result = recover_placement(p, 0, [0], services, self.attack(nodes, 0), d)
        assert result.complete
        assert result.placement.x[:, 0].tolist() == [0, 1, 1]

    def test_no_capacity_reports_unrecovered(self):
        nodes = make_nodes(2, capacity=10.0)
        services = make_services([10.0])
        p = PlacementDecision(x=np.array([[1], [1]]))
        d = uniform_delay(2, 1)
        result = recover_placement(p, 0, [0], services, self.attack(nodes, 0), d)
        assert result.unrecovered == (0,)
        assert result.placement.x[:, 0].tolist() == [0, 1]

    def test_never_places_on_attacked_node(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            nodes, services, delay = grid_scenario(seed=int(rng.integers(1000)))
            p = place_services(services, nodes, delay, instances_per_service=3)
            target = int(rng.integers(0, 9))
            lost = p.services_on(target)
            result = recover_placement(
                p, target, lost, services, self.attack(nodes, target), delay
            )
            assert result.placement.x[target].sum() == 0
            assert result.placement.reserved[target].sum() == 0
            report = validate_placement(result.placement, nodes, services,
                                        require_redundancy=result.complete)
            assert all(report.resource_ok)

    def test_delay_tie_breaks_to_lowest_index(self):
        nodes = make_nodes(4)
        services = make_services([10.0])
        p = PlacementDecision(x=np.array([[1], [1], [0], [0]]))
        d = uniform_delay(4, 1)
        result = recover_placement(p, 0, [0], services, self.attack(nodes, 0), d)
        assert result.placement.x[:, 0].tolist() == [0, 1, 1, 0]
