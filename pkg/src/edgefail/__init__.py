"""Attack-resilient vehicle-to-edge service mapping.

A numpy-based library plus a small CLI: optimal primary assignment of
vehicle demand to edge service instances, a proactive load-balanced
failover split solved as a separable convex program, baseline failover
policies, and a discrete-time failure/recovery simulation with delay,
load-factor, and fairness metrics.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig
from .errors import (
    ConcurrentAttackError,
    ConfigError,
    EdgefailError,
    InfeasibleError,
    IngestError,
    NoCandidateError,
    SaturationError,
    StructuralError,
)
from .metrics import (
    MetricsRecord,
    average_elf,
    edge_load_factor,
    jain_fairness,
    queue_delay,
    service_delay,
)
from .mobility import (
    BoundingBox,
    GridMap,
    MobilityModel,
    TracePoint,
    derive_delay_matrix,
    derive_demand,
    generate_synthetic,
    ingest_trace,
)
from .model import (
    AttackEvent,
    DelayModel,
    EdgeNode,
    NodeStatus,
    PlacementDecision,
    PrimaryMapping,
    SecondaryMapping,
    ServiceRequest,
    ServiceType,
    SimPhase,
    round_preserving_sum,
    validate_placement,
)
from .placement import RecoveryResult, place_services, recover_placement, reserve_backup
from .simulation import QualityMonitor, Simulation, evaluate_quality
from .solvers import (
    LbPsvmProblem,
    LbPsvmSolution,
    bottleneck_delay,
    build_lb_psvm,
    lb_objective,
    oracle_lb_psvm,
    solve_lb_psvm,
    solve_primary_mapping,
    solve_psvm,
)
from .experiment import RunArtifacts, compare, run, simulate_policy

__all__ = [
    "AttackEvent",
    "BoundingBox",
    "ConcurrentAttackError",
    "ConfigError",
    "DelayModel",
    "EdgeNode",
    "EdgefailError",
    "ExperimentConfig",
    "GridMap",
    "InfeasibleError",
    "IngestError",
    "LbPsvmProblem",
    "LbPsvmSolution",
    "MetricsRecord",
    "MobilityModel",
    "NoCandidateError",
    "NodeStatus",
    "PlacementDecision",
    "PrimaryMapping",
    "QualityMonitor",
    "RecoveryResult",
    "RunArtifacts",
    "SaturationError",
    "SecondaryMapping",
    "ServiceRequest",
    "ServiceType",
    "SimPhase",
    "Simulation",
    "StructuralError",
    "TracePoint",
    "average_elf",
    "bottleneck_delay",
    "build_lb_psvm",
    "compare",
    "derive_delay_matrix",
    "derive_demand",
    "edge_load_factor",
    "evaluate_quality",
    "generate_synthetic",
    "ingest_trace",
    "jain_fairness",
    "lb_objective",
    "oracle_lb_psvm",
    "place_services",
    "queue_delay",
    "recover_placement",
    "reserve_backup",
    "round_preserving_sum",
    "run",
    "service_delay",
    "simulate_policy",
    "solve_lb_psvm",
    "solve_primary_mapping",
    "solve_psvm",
    "validate_placement",
]
