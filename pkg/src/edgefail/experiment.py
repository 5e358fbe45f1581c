"""Batch experiment runner: policy sweeps, CSV metrics, summaries, manifests.

One invocation simulates every requested policy over the same request
stream and writes three artifacts into the output directory:

* ``metrics.csv``  -- one row per (policy, time unit)
* ``summary.csv``  -- per-policy averages in the comparison-table shape
* ``manifest.json`` -- resolved config, its hash, seed, dataset, version

Identical config + seed reproduce byte-identical CSV bodies.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import ConfigError
from .metrics import MetricsRecord
from .mobility import generate_synthetic, ingest_trace
from .simulation import Simulation

METRICS_STATIC_COLUMNS = ["t", "state", "policy", "avg_delay_ms"]
METRICS_TAIL_COLUMNS = ["avg_elf_pct", "fairness", "q_value"]
SUMMARY_COLUMNS = ["policy", "avg_delay_ms", "avg_elf_attack_pct", "mean_fairness"]

GNUPLOT_SCRIPT = """\
# gnuplot recipe for the metrics written next to this file
set datafile separator ','
set key autotitle columnheader
set xlabel 'time unit'
set ylabel 'average delay (ms)'
plot for [p in policies] 'metrics.csv' \\
    using 1:($3 eq p ? $4 : 1/0) with lines title p
"""


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def build_requests(cfg: ExperimentConfig):
    """Materialize the request stream for the configured dataset."""
    if cfg.dataset == "synthetic":
        return generate_synthetic(
            seed=cfg.seed,
            vehicles=cfg.mobility_vehicles,
            grid=cfg.grid(),
            horizon=cfg.horizon,
            model=cfg.mobility_model(),
            num_services=cfg.services_count,
        )
    path = cfg.trace_path()
    if not os.path.exists(path):
        raise ConfigError(f"dataset: trace file not found: {path}")
    result = ingest_trace(
        path,
        bbox=cfg.bbox(),
        grid=cfg.grid(),
        time_unit_s=cfg.trace_time_unit_s,
        num_services=cfg.services_count,
        seed=cfg.seed,
        carry_gap=cfg.trace_carry_gap,
    )
    units = result.requests_by_unit[: cfg.horizon]
    while len(units) < cfg.horizon:
        units.append([])
    return units


def simulate_policy(cfg: ExperimentConfig, policy: str, requests=None) -> list[MetricsRecord]:
    """Run one policy over the configured (or provided) request stream."""
    if requests is None:
        requests = build_requests(cfg)
    return Simulation(cfg, policy).run(requests)


def _worker(args):
    cfg_dict, policy = args
    cfg = ExperimentConfig.from_sources(overrides=cfg_dict)
    return policy, simulate_policy(cfg, policy)


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: str
    metrics_path: str
    summary_path: str
    manifest_path: str
    records: dict  # policy -> list[MetricsRecord]
    summary: dict  # policy -> dict of summary metrics


def summarize(records: list[MetricsRecord]) -> dict[str, float]:
    """Per-run averages: delay over all units, ELF and fairness over
    units with active failover (the attack columns of a comparison table)."""
    delays = [r.avg_delay for r in records]
    failover = [r for r in records if r.failover_active]
    return {
        "avg_delay_ms": float(np.mean(delays)) if delays else 0.0,
        "avg_elf_attack_pct": float(np.mean([r.avg_elf for r in failover])) if failover else 0.0,
        "mean_fairness": float(np.mean([r.fairness for r in failover])) if failover else 1.0,
    }


def resolve_out_dir(cfg: ExperimentConfig, out: str | None = None) -> str:
    return out or cfg.out or os.environ.get("EDGEFAIL_OUT_DIR") or "out"


def run(cfg: ExperimentConfig, out: str | None = None) -> RunArtifacts:
    """Execute the configured sweep and write the artifact set.

    Policies run over one shared request stream so their rows are
    directly comparable.  ``jobs > 1`` runs policies in parallel worker
    processes; outputs are merged in policy order so the CSV bodies stay
    byte-identical either way.
    """
    cfg.validate()
    policies = cfg.policy_list()
    out_dir = resolve_out_dir(cfg, out)
    os.makedirs(out_dir, exist_ok=True)

    if cfg.jobs > 1 and len(policies) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(policies))) as pool:
            results = dict(pool.map(_worker, [(cfg.to_dict(), p) for p in policies]))
        records = {p: results[p] for p in policies}
    else:
        requests = build_requests(cfg)
        records = {p: simulate_policy(cfg, p, requests) for p in policies}

    S = cfg.services_count
    header = (
        METRICS_STATIC_COLUMNS
        + [f"delay_s{s}_ms" for s in range(S)]
        + METRICS_TAIL_COLUMNS
    )
    lines = [",".join(header)]
    for policy in policies:
        for r in records[policy]:
            row = [str(r.time), r.state.value, policy, _fmt(r.avg_delay)]
            row += [_fmt(v) for v in r.per_service_delay]
            row += [_fmt(r.avg_elf), _fmt(r.fairness), _fmt(r.q_value)]
            lines.append(",".join(row))
    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = {p: summarize(records[p]) for p in policies}
    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for p in policies:
            row = [p] + [_fmt(summary[p][c]) for c in SUMMARY_COLUMNS[1:]]
            fh.write(",".join(row) + "\n")

    manifest = {
        "config": {k: v for k, v in sorted(cfg.to_dict().items())},
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "dataset": cfg.dataset,
        "policies": policies,
        "version": __version__,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "plots.gp"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"policies = '{' '.join(policies)}'\n" + GNUPLOT_SCRIPT)

    return RunArtifacts(
        out_dir=out_dir,
        metrics_path=metrics_path,
        summary_path=summary_path,
        manifest_path=manifest_path,
        records=records,
        summary=summary,
    )


# ---- cross-run comparison ----------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """Side-by-side summaries of several runs sharing a config hash."""

    columns: tuple[str, ...]  # (run_label, policy) pairs flattened
    values: dict  # (run_label, policy) -> {metric: value}
    deltas: dict  # (run_label, policy) -> {metric: value - baseline}
    winners: dict  # metric -> (run_label, policy)

    def to_text(self) -> str:
        metrics = SUMMARY_COLUMNS[1:]
        labels = list(self.values)
        width = max(24, *(len(f"{r}:{p}") for r, p in labels)) + 2
        out = ["metric".ljust(22) + "".join(f"{r}:{p}".rjust(width) for r, p in labels)]
        for m in metrics:
            row = m.ljust(22)
            for key in labels:
                mark = " *" if self.winners.get(m) == key else "  "
                row += f"{self.values[key][m]:.4f}{mark}".rjust(width)
            out.append(row)
        out.append("(* = best; delay and ELF lower is better, fairness higher)")
        return "\n".join(out)


def _read_summary(path: str) -> dict[str, dict[str, float]]:
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows or rows[0] != SUMMARY_COLUMNS:
        raise ConfigError(f"{path}: not a summary file (header mismatch)")
    return {
        r[0]: {c: float(v) for c, v in zip(SUMMARY_COLUMNS[1:], r[1:])} for r in rows[1:]
    }


def compare(summary_paths: list[str]) -> Comparison:
    """Compare two or more run summaries produced with the same config.

    Raises:
        ConfigError: on fewer than two runs or mismatched config hashes
            (the message lists the differing keys).
    """
    if len(summary_paths) < 2:
        raise ConfigError("compare needs at least two summary files")
    manifests = []
    for path in summary_paths:
        mpath = os.path.join(os.path.dirname(path) or ".", "manifest.json")
        if not os.path.exists(mpath):
            raise ConfigError(f"{path}: no manifest.json next to the summary")
        with open(mpath, encoding="utf-8") as fh:
            manifests.append(json.load(fh))
    base = manifests[0]
    for m, path in zip(manifests[1:], summary_paths[1:]):
        if m["config_hash"] != base["config_hash"]:
            diff = [
                f"{k}: {base['config'].get(k)!r} != {m['config'].get(k)!r}"
                for k in sorted(set(base["config"]) | set(m["config"]))
                if k not in ("policies", "out", "jobs")
                and base["config"].get(k) != m["config"].get(k)
            ]
            raise ConfigError(
                f"{path}: config mismatch with {summary_paths[0]}: " + "; ".join(diff)
            )

    values = {}
    seen_labels = set()
    for path in summary_paths:
        parent = os.path.dirname(path) or "."
        label = os.path.basename(parent) or path
        if label in seen_labels:
            label = parent  # disambiguate same-named run directories
        seen_labels.add(label)
        for policy, metrics in _read_summary(path).items():
            values[(label, policy)] = metrics

    baseline_by_policy: dict[str, dict[str, float]] = {}
    for (label, policy), v in values.items():
        baseline_by_policy.setdefault(policy, v)
    deltas = {
        key: {m: v[m] - baseline_by_policy[key[1]][m] for m in v}
        for key, v in values.items()
    }
    winners = {}
    for m in SUMMARY_COLUMNS[1:]:
        pick = min if m != "mean_fairness" else max
        winners[m] = pick(values, key=lambda k: values[k][m])
    return Comparison(
        columns=tuple(values),
        values=values,
        deltas=deltas,
        winners=winners,
    )
