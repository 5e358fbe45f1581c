"""Vehicle-to-edge mapping solvers.

Three pieces:

* ``solve_primary_mapping`` -- min-max (bottleneck) assignment of each
  service's demand onto its instances, ties broken by cheapest total
  delay (fill instances in ascending delay order).
* ``solve_lb_psvm`` -- the fair failover split.  Minimizes
  ``sum_i [-w_i ln b_i + k1 d_i b_i + k2 q_i(b_i)]`` subject to
  ``sum b_i = affected``, ``b_i >= 0``, where q_i is the M/D/1 overload
  term of node i.  The objective is separable and strictly convex, so we
  run a dual bisection on the multiplier of the sum constraint with an
  exact 1-D solve per coordinate (closed form below the queue kink,
  safeguarded Newton above it).
* ``oracle_lb_psvm`` -- exhaustive simplex grid search used in tests as
  an independent check of the dual solver.

``solve_psvm`` is the all-to-one baseline that sends every affected
vehicle to the single lowest-delay candidate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NoCandidateError
from .model import DelayModel, PlacementDecision, PrimaryMapping, SecondaryMapping

logger = logging.getLogger(__name__)

# Distance kept between any iterate and the 2C pole of the queue term.
QUEUE_GUARD = 1e-6
# Reported betas are floored here; the shaved mass moves to the largest
# coordinate so the sum constraint stays exact.
BETA_FLOOR = 1e-9


def solve_primary_mapping(
    placement: PlacementDecision,
    demand,
    delay: DelayModel,
    capacity: float,
) -> PrimaryMapping:
    """Assign each service's demand to its instances, minimizing the
    bottleneck delay.

    The least feasible bottleneck is found by filling instances in
    ascending delay order: the last instance needed sets the bottleneck,
    and cheapest-first filling also minimizes the total delay mass among
    assignments within that bottleneck.

    Raises:
        InfeasibleError: when some service's demand exceeds the combined
            capacity of its instances (names the service).
    """
    demand = np.asarray(demand, dtype=float)
    E, S = placement.x.shape
    if demand.shape != (S,):
        raise InfeasibleError(f"demand vector has length {demand.shape}, expected {S}")
    gamma = np.zeros((E, S))
    for s in range(S):
        lam = float(demand[s])
        if lam <= 0:
            continue
        hosts = placement.nodes_hosting(s)
        if capacity * len(hosts) + 1e-9 < lam:
            raise InfeasibleError(
                f"service {s}: demand {lam:.6g} exceeds capacity "
                f"{capacity * len(hosts):.6g} across {len(hosts)} instance(s)"
            )
        remaining = lam
        for e in sorted(hosts, key=lambda e: (delay.d[e, s], e)):
            take = min(remaining, capacity)
            gamma[e, s] = take
            remaining -= take
            if remaining <= 0:
                break
    return PrimaryMapping(gamma=gamma)


def bottleneck_delay(gamma: PrimaryMapping, delay: DelayModel) -> np.ndarray:
    """Per-service max propagation delay over instances carrying load."""
    E, S = gamma.gamma.shape
    out = np.zeros(S)
    for s in range(S):
        used = gamma.gamma[:, s] > 0
        if used.any():
            out[s] = float(delay.d[used, s].max())
    return out


def failover_candidates(
    placement: PlacementDecision,
    attacked: int,
    service: int,
    healthy=None,
) -> list[int]:
    """Healthy nodes (other than the attacked one) hosting the service."""
    hosts = placement.nodes_hosting(service)
    if healthy is None:
        return [e for e in hosts if e != attacked]
    healthy = set(healthy)
    return [e for e in hosts if e != attacked and e in healthy]


@dataclass(frozen=True)
class LbPsvmProblem:
    """One failover split instance for a single (attacked node, service)."""

    weights: np.ndarray  # w_i in (0, 1]
    prior_load: np.ndarray  # primary load at each candidate
    delay: np.ndarray  # ms, per candidate
    capacity: float
    affected: float  # vehicles to re-home
    delay_cap: float  # ms threshold of the service
    k1: float
    k2: float
    epsilon: float
    candidates: tuple[int, ...] = ()
    service: int = -1
    source_node: int = -1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        g = np.asarray(self.prior_load, dtype=float)
        d = np.asarray(self.delay, dtype=float)
        n = w.shape[0]
        if n < 1:
            raise NoCandidateError("need at least one candidate node")
        if g.shape != (n,) or d.shape != (n,):
            raise ValueError("weights, prior_load and delay must have equal length")
        if (w <= 0).any() or (w > 1 + 1e-12).any():
            raise ValueError("weights must lie in (0, 1]")
        if (g < 0).any() or (d < 0).any():
            raise ValueError("prior loads and delays must be >= 0")
        if self.affected < 0:
            raise ValueError("affected must be >= 0")
        if self.capacity <= 0 or self.delay_cap <= 0 or self.epsilon <= 0:
            raise ValueError("capacity, delay_cap and epsilon must be > 0")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("k1 and k2 must be >= 0")
        for name, arr in (("weights", w), ("prior_load", g), ("delay", d)):
            arr = np.asarray(arr, dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class LbPsvmSolution:
    """Solver output: split vector plus objective/delay diagnostics."""

    beta: np.ndarray
    objective: float
    delay_attained: float  # propagation mass + raw queue terms at the optimum
    feasible_delay: bool  # whether delay_attained meets the service cap
    mu: float  # multiplier of the sum constraint
    residual: float  # spread of the stationarity quantity over interior coords
    saturated: bool  # some coordinate hit the queue-domain guard
    branches: tuple[str, ...] = ()
    problem: LbPsvmProblem | None = None

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        b.flags.writeable = False
        object.__setattr__(self, "beta", b)

    def to_secondary(self) -> SecondaryMapping:
        if self.problem is None:
            raise ValueError("solution carries no problem context")
        return SecondaryMapping(
            source_node=self.problem.source_node,
            service=self.problem.service,
            candidates=self.problem.candidates,
            beta=self.beta,
            affected=float(self.beta.sum()),
        )


def build_lb_psvm(
    gamma: PrimaryMapping,
    placement: PlacementDecision,
    attacked: int,
    service: int,
    delay: DelayModel,
    capacity: float,
    delay_cap: float,
    k1: float | None = None,
    k2: float | None = None,
    epsilon: float = 1e-3,
    healthy=None,
) -> LbPsvmProblem:
    """Assemble the failover split problem for one attacked node/service.

    Weights follow w_i = 1 - (load_i - epsilon) / C, clipped into (0, 1]:
    the offset keeps fully loaded candidates at a small positive weight
    instead of a zero multiplier.  ``k1``/``k2`` default to 1/delay_cap,
    which puts the delay terms on the same scale as the log utility.

    Raises:
        NoCandidateError: when no healthy node hosts the service.
    """
    candidates = failover_candidates(placement, attacked, service, healthy)
    # a candidate already past the queue-model domain cannot take load
    candidates = [e for e in candidates if gamma.gamma[e, service] < 2 * capacity - 2 * QUEUE_GUARD]
    if not candidates:
        raise NoCandidateError(
            f"service {service}: no healthy candidate besides node {attacked}"
        )
    loads = np.array([gamma.gamma[e, service] for e in candidates])
    w = np.minimum(1.0, 1.0 - (loads - epsilon) / capacity)
    d = np.array([delay.d[e, service] for e in candidates])
    if k1 is None:
        k1 = 1.0 / delay_cap
    if k2 is None:
        k2 = 1.0 / delay_cap
    return LbPsvmProblem(
        weights=w,
        prior_load=loads,
        delay=d,
        capacity=capacity,
        affected=float(gamma.gamma[attacked, service]),
        delay_cap=delay_cap,
        k1=k1,
        k2=k2,
        epsilon=epsilon,
        candidates=tuple(candidates),
        service=service,
        source_node=attacked,
    )


def queue_term(load: float, extra: float, capacity: float) -> float:
    """Raw M/D/1 waiting time at one instance serving load + extra."""
    u = load + extra - capacity
    if u <= 0:
        return 0.0
    return u / (2.0 * capacity * (capacity - u))


def queue_term_slope(load: float, extra: float, capacity: float) -> float:
    """Right-derivative of the queue term w.r.t. the added load."""
    u = load + extra - capacity
    if u < 0:
        return 0.0
    v = capacity - u
    return 1.0 / (2.0 * v * v)


def lb_objective(problem: LbPsvmProblem, beta) -> float:
    """Objective value sum(-w ln b + k1 d b + k2 q(b)) at a given split."""
    beta = np.asarray(beta, dtype=float)
    total = 0.0
    for i in range(problem.n):
        b = float(beta[i])
        if b <= 0:
            return math.inf
        total += -problem.weights[i] * math.log(b) + problem.k1 * problem.delay[i] * b
        total += problem.k2 * queue_term(problem.prior_load[i], b, problem.capacity)
    return total


def _attained_delay(problem: LbPsvmProblem, beta) -> float:
    """Propagation mass plus raw queue terms (the combined delay expression)."""
    total = 0.0
    for i in range(problem.n):
        b = float(beta[i])
        total += problem.delay[i] * b
        total += queue_term(problem.prior_load[i], b, problem.capacity)
    return total


def _coord_solve(mu, w, d, g, C, k1, k2, bmax):
    """Solve w/b - k1 d - k2 q'(b) = mu for one coordinate.

    Returns (beta, branch) with branch in {"interior", "kink", "clamped"}.
    The stationarity function is strictly decreasing in b, piecewise
    smooth with a kink where the instance starts queueing (b = C - g).
    """
    kink = C - g
    if kink > 0.0:
        g_minus = w / kink - k1 * d
        if mu >= g_minus:
            # no-queue region: closed form, lands at or below the kink
            return w / (mu + k1 * d), "interior"
        if mu >= g_minus - k2 / (2.0 * C * C):
            return kink, "kink"
        lo = kink
    else:
        lo = 0.0
    # queue region (b > kink): check the guard first
    v_hi = 2.0 * C - g - bmax  # = guard by construction
    f_hi = w / bmax - k1 * d - k2 / (2.0 * v_hi * v_hi) - mu
    if f_hi >= 0.0:
        return bmax, "clamped"
    hi = bmax
    x = 0.5 * (lo + hi)
    for _ in range(100):
        v = 2.0 * C - g - x
        f = w / x - k1 * d - k2 / (2.0 * v * v) - mu
        if f > 0.0:
            lo = x
        else:
            hi = x
        fp = -w / (x * x) - k2 / (v * v * v)
        step = f / fp
        xn = x - step
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * max(1.0, x):
            x = xn
            break
        x = xn
    return x, "interior"


def solve_lb_psvm(
    problem: LbPsvmProblem,
    max_iters: int = 200,
    guard: float = QUEUE_GUARD,
    kkt_tol: float = 1e-8,
    initial_bracket: tuple[float, float] | None = None,
) -> LbPsvmSolution:
    """Minimize the fair failover objective under the sum constraint.

    Dual bisection on the multiplier mu: each candidate's best response
    beta_i(mu) is solved exactly per coordinate, and mu is adjusted until
    the responses sum to the affected count (within 1e-10).  The
    stationarity spread of the result is checked against ``kkt_tol``.
    The delay cap is not enforced as a hard constraint; ``feasible_delay``
    reports whether the optimum meets it.

    Raises:
        InfeasibleError: when the candidates cannot absorb the affected
            load inside the queue-model domain (no strict interior).
    """
    n = problem.n
    B = float(problem.affected)
    w = [float(x) for x in problem.weights]
    d = [float(x) for x in problem.delay]
    g = [float(x) for x in problem.prior_load]
    C = float(problem.capacity)
    k1, k2 = float(problem.k1), float(problem.k2)

    if B == 0.0:
        beta = np.zeros(n)
        return LbPsvmSolution(
            beta=beta,
            objective=0.0,
            delay_attained=0.0,
            feasible_delay=True,
            mu=math.nan,
            residual=0.0,
            saturated=False,
            branches=("zero",) * n,
            problem=problem,
        )

    bmax = [2.0 * C - gi - guard for gi in g]
    if sum(bmax) <= B:
        raise InfeasibleError(
            f"affected load {B:.6g} leaves no strict interior "
            f"(candidates absorb at most {sum(bmax):.6g})"
        )

    def responses(mu):
        betas = []
        branches = []
        for i in range(n):
            b, br = _coord_solve(mu, w[i], d[i], g[i], C, k1, k2, bmax[i])
            betas.append(b)
            branches.append(br)
        return betas, branches

    # bracket the multiplier: responses() shrinks as mu grows
    if initial_bracket is not None:
        mu_lo, mu_hi = initial_bracket
    else:
        mu0 = sum(w) / B
        mu_lo = mu_hi = mu0
    step = max(1.0, abs(mu_lo))
    while sum(responses(mu_hi)[0]) > B:
        mu_hi += step
        step *= 2.0
    step = max(1.0, abs(mu_hi))
    while sum(responses(mu_lo)[0]) < B:
        mu_lo -= step
        step *= 2.0

    sum_tol = max(1e-11, 1e-12 * B)
    mu = 0.5 * (mu_lo + mu_hi)
    betas, branches = responses(mu)
    for _ in range(max_iters):
        total = sum(betas)
        if abs(total - B) <= sum_tol:
            break
        if total > B:
            mu_lo = mu
        else:
            mu_hi = mu
        nxt = 0.5 * (mu_lo + mu_hi)
        if nxt == mu_lo or nxt == mu_hi:
            break
        mu = nxt
        betas, branches = responses(mu)
    else:
        total = sum(betas)

    # Newton polish on the dual keeps a common multiplier while pushing
    # the sum residual to the constraint tolerance
    for _ in range(5):
        total = sum(betas)
        if abs(total - B) <= sum_tol:
            break
        slope = 0.0
        for i in range(n):
            if branches[i] != "interior":
                continue
            v = 2.0 * C - g[i] - betas[i]
            slope += 1.0 / (-w[i] / (betas[i] ** 2) - (k2 / (v**3) if betas[i] > C - g[i] else 0.0))
        if slope == 0.0:
            break
        nxt = mu + (B - total) / slope
        if not (mu_lo <= nxt <= mu_hi):
            break
        mu = nxt
        betas, branches = responses(mu)

    beta = np.array(betas)
    # reporting floor; shaved mass moves to the largest coordinate
    low = beta < BETA_FLOOR
    if low.any() and B > 10 * n * BETA_FLOOR:
        deficit = float((BETA_FLOOR - beta[low]).sum())
        beta[low] = BETA_FLOOR
        beta[int(np.argmax(beta))] -= deficit

    interior = [i for i in range(n) if branches[i] == "interior"]
    if len(interior) >= 2:
        vals = [
            w[i] / beta[i] - k1 * d[i] - k2 * queue_term_slope(g[i], float(beta[i]), C)
            for i in interior
        ]
        residual = max(vals) - min(vals)
    else:
        residual = 0.0
    if residual > kkt_tol:
        logger.warning(
            "stationarity spread %.3g exceeds tolerance %.3g (n=%d, affected=%.4g)",
            residual, kkt_tol, n, B,
        )

    attained = _attained_delay(problem, beta)
    return LbPsvmSolution(
        beta=beta,
        objective=lb_objective(problem, beta),
        delay_attained=attained,
        feasible_delay=bool(attained <= problem.delay_cap + 1e-12),
        mu=mu,
        residual=float(residual),
        saturated=any(br == "clamped" for br in branches),
        branches=tuple(branches),
        problem=problem,
    )


def solve_psvm(
    gamma: PrimaryMapping,
    placement: PlacementDecision,
    attacked: int,
    service: int,
    delay: DelayModel,
    healthy=None,
) -> SecondaryMapping:
    """All-to-one baseline: every affected vehicle goes to the single
    lowest-delay healthy candidate (ties to the lowest node index)."""
    candidates = failover_candidates(placement, attacked, service, healthy)
    if not candidates:
        raise NoCandidateError(
            f"service {service}: no healthy candidate besides node {attacked}"
        )
    target = min(candidates, key=lambda e: (delay.d[e, service], e))
    beta = np.zeros(len(candidates))
    affected = float(gamma.gamma[attacked, service])
    beta[candidates.index(target)] = affected
    return SecondaryMapping(
        source_node=attacked,
        service=service,
        candidates=tuple(candidates),
        beta=beta,
        affected=affected,
    )


def oracle_lb_psvm(problem: LbPsvmProblem, step: float) -> LbPsvmSolution:
    """Exhaustive grid search over the split simplex (test oracle).

    Enumerates all splits with coordinates on a uniform grid of spacing
    ~``step`` summing exactly to the affected count and returns the best.
    Independent of the dual solver; only meant for small instances.

    Raises:
        ValueError: for n > 4 or grids too large to enumerate.
    """
    n = problem.n
    if n > 4:
        raise ValueError("oracle limited to n <= 4 candidates")
    if step <= 0:
        raise ValueError("step must be > 0")
    B = float(problem.affected)
    if B == 0.0:
        return LbPsvmSolution(
            beta=np.zeros(n), objective=0.0, delay_attained=0.0, feasible_delay=True,
            mu=math.nan, residual=math.nan, saturated=False, problem=problem,
        )
    m = max(1, int(round(B / step)))
    if (n == 3 and m > 40_000) or (n == 4 and m > 400):
        raise ValueError(f"grid of {m} steps too large for n={n}")
    h = B / m
    vals = np.arange(m + 1) * h
    vals[-1] = B

    C = problem.capacity
    tables = []
    for i in range(n):
        u = problem.prior_load[i] + vals - C
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(u > 0, u / (2.0 * C * (C - u)), 0.0)
            phi = (
                -problem.weights[i] * np.log(vals)
                + problem.k1 * problem.delay[i] * vals
                + problem.k2 * q
            )
        phi[0] = np.inf
        phi[u >= C - QUEUE_GUARD] = np.inf  # outside the queue-model domain
        tables.append(phi)

    best_val = np.inf
    best = None
    if n == 1:
        best_val = float(tables[0][m])
        best = (m,)
    elif n == 2:
        tot = tables[0] + tables[1][::-1]
        k = int(np.argmin(tot))
        best_val = float(tot[k])
        best = (k, m - k)
    elif n == 3:
        for k0 in range(m + 1):
            rem = m - k0
            tot = tables[1][: rem + 1] + tables[2][rem::-1]
            k1_ = int(np.argmin(tot))
            v = float(tables[0][k0] + tot[k1_])
            if v < best_val:
                best_val = v
                best = (k0, k1_, rem - k1_)
    else:
        for k0 in range(m + 1):
            for k1_ in range(m - k0 + 1):
                rem = m - k0 - k1_
                tot = tables[2][: rem + 1] + tables[3][rem::-1]
                k2_ = int(np.argmin(tot))
                v = float(tables[0][k0] + tables[1][k1_] + tot[k2_])
                if v < best_val:
                    best_val = v
                    best = (k0, k1_, k2_, rem - k2_)
    if best is None or not np.isfinite(best_val):
        raise InfeasibleError("no feasible grid point")
    beta = np.array([vals[k] for k in best])
    attained = _attained_delay(problem, beta)
    return LbPsvmSolution(
        beta=beta,
        objective=best_val,
        delay_attained=attained,
        feasible_delay=bool(attained <= problem.delay_cap + 1e-12),
        mu=math.nan,
        residual=math.nan,
        saturated=False,
        problem=problem,
    )
