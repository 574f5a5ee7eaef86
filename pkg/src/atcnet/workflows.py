"""Experiment orchestration shared by the CLI and the test suite.

Produces plain-dict payloads (JSON-ready, lossless round-trip) and CSV
artifacts, keeping file layout and schemas in one place:

* ``analysis.json``    network structure, W, limit points, influence vectors
* ``runs/run_<k>.csv`` per-run squared errors (iteration, agent_id, sq_error)
* ``learning_curve.csv`` across-run mean error in dB per agent
* ``msd_report.json``  theoretical MSD per sub-network / receiving agent
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import engine, influence, performance
from .config import ExperimentConfig
from .errors import ConfigError
from .topology import NetworkPartition, classify, perron, spectral_radius


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    return value


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def comparison_payload(payload: dict) -> dict:
    """Copy of a payload with volatile fields removed, for byte comparisons."""
    return {k: v for k, v in payload.items() if k != "generated_at"}


def pareto_points(
    partition: NetworkPartition, models, step_sizes
) -> list[np.ndarray]:
    """One Pareto solution per sending sub-network."""
    qw = performance.q_weights(partition, step_sizes)
    stars = []
    at = 0
    for s, size in enumerate(partition.s_sizes):
        members = [int(i) for i in partition.order[at : at + size]]
        stars.append(performance.pareto_solve([models[k] for k in members], qw.per_subnetwork[s]))
        at += size
    return stars


def limit_points_for(config: ExperimentConfig):
    """Partition, limit points and Pareto solutions for a full config."""
    partition = classify(config.matrix)
    models = config.require_models()
    step_sizes = config.require_step_sizes()
    stars = pareto_points(partition, models, step_sizes)
    w = influence.influence_matrix(partition).w
    points = influence.receiving_limit_points(w, stars, partition)
    return partition, points, stars


def analyze(config: ExperimentConfig) -> dict:
    """Structure report: partition, W, limiting power, influence, limit points.

    Limit points are included only when the config carries models and step
    sizes; everything else needs the combination matrix alone.
    """
    partition = classify(config.matrix)
    payload: dict = {
        "name": config.name,
        "generated_at": _timestamp(),
        "agents": config.n,
        "strongly_connected": partition.n_gr == 0,
        "sccs": [
            {
                "id": i,
                "agents": list(members),
                "type": "S" if i in partition.s_type_ids else "R",
            }
            for i, members in enumerate(partition.scc_list)
        ],
        "s_agents": list(partition.s_agents),
        "r_agents": list(partition.r_agents),
        "subnetworks": [],
    }
    at = 0
    for s, (block, size) in enumerate(zip(partition.s_blocks(), partition.s_sizes)):
        members = [int(i) for i in partition.order[at : at + size]]
        p = perron(block).entries
        entry = {"id": s, "agents": members, "perron": p}
        if config.step_sizes is not None:
            entry["q"] = config.step_sizes.mu[members] * p
        payload["subnetworks"].append(entry)
        at += size

    lim = influence.limiting_power(config.matrix, partition)
    payload["a_infinity"] = lim.original

    if partition.n_gr:
        im = influence.influence_matrix(partition)
        payload["spectral_radius_t_rr"] = spectral_radius(partition.t_rr)
        payload["condition_i_minus_t_rr"] = im.cond
        payload["w"] = {
            "rows": list(partition.s_agents),
            "cols": list(partition.r_agents),
            "values": im.w,
        }
        payload["influence"] = [
            {
                "agent": agent,
                "c": influence.influence_vector(im.w, partition, agent).entries,
            }
            for agent in partition.r_agents
        ]

    if config.models is not None and config.step_sizes is not None:
        _, points, stars = limit_points_for(config)
        payload["limit_points"] = {
            "w_star": [
                {"subnetwork": s, "value": star} for s, star in enumerate(stars)
            ],
            "w_bullet": [
                {"agent": agent, "value": points.w_bullet[i]}
                for i, agent in enumerate(partition.r_agents)
            ],
            "by_agent": points.by_original_agent(),
            "fixed_point_residual": influence.fixed_point_residual(config.matrix, points),
        }
    return _jsonable(payload)


@dataclass
class SimulationResult:
    partition: NetworkPartition
    limit_points: np.ndarray            # (N, M), original order
    trajectories: list[engine.Trajectory]
    estimate: engine.MsdEstimate | None
    payload: dict


def simulate(config: ExperimentConfig) -> SimulationResult:
    """Monte-Carlo diffusion per the config's run controls."""
    iterations = config.require_iterations()
    models = config.require_models()
    step_sizes = config.require_step_sizes()
    if step_sizes.n != config.n:
        raise ConfigError("step sizes and matrix disagree on agent count")
    partition, points, stars = limit_points_for(config)
    lp = points.by_original_agent()
    trajectories = engine.run_ensemble(
        config.matrix,
        list(models),
        step_sizes,
        lp,
        iterations=iterations,
        n_runs=config.run.monte_carlo_runs,
        master_seed=config.run.seed,
        stride=config.run.stride,
        record_iterates=config.run.record_iterates,
    )
    estimate = (
        engine.estimate_msd(trajectories, config.run.burn_in_fraction)
        if len(trajectories) >= 2
        else None
    )
    payload: dict = {
        "name": config.name,
        "generated_at": _timestamp(),
        "seed": config.run.seed,
        "iterations": iterations,
        "monte_carlo_runs": config.run.monte_carlo_runs,
        "mu_max": step_sizes.mu_max,
        "limit_points": _jsonable(lp),
        "s_agents": list(partition.s_agents),
        "r_agents": list(partition.r_agents),
    }
    if estimate is not None:
        payload["msd_estimate"] = {
            "per_agent": _jsonable(estimate.per_agent),
            "halfwidth": _jsonable(estimate.halfwidth),
            "burn_in_fraction": config.run.burn_in_fraction,
        }
    if config.run.record_iterates:
        start = int(np.floor(config.run.burn_in_fraction * trajectories[0].iterates.shape[0]))
        tail = [traj.iterates[start:].mean(axis=0) for traj in trajectories]
        payload["mean_iterate_tail"] = _jsonable(np.mean(tail, axis=0))
    return SimulationResult(
        partition=partition,
        limit_points=lp,
        trajectories=trajectories,
        estimate=estimate,
        payload=_jsonable(payload),
    )


def learning_curve(trajectories: list[engine.Trajectory]) -> tuple[np.ndarray, np.ndarray]:
    """Across-run mean squared error per recorded iteration; (iters, (T, N))."""
    mean = np.mean([traj.sq_error for traj in trajectories], axis=0)
    return trajectories[0].iterations, mean


def msd(config: ExperimentConfig, with_sim: bool = False) -> dict:
    """Theoretical MSD report; optionally attach Monte-Carlo comparisons."""
    models = config.require_models()
    step_sizes = config.require_step_sizes()
    partition = classify(config.matrix)
    stars = pareto_points(partition, list(models), step_sizes)
    report = performance.theoretical_msd(
        partition, list(models), step_sizes, w_stars=stars
    )
    payload: dict = {
        "name": config.name,
        "generated_at": _timestamp(),
        "subnetworks": [
            {
                "id": sub.subnetwork,
                "agents": list(sub.agents),
                "msd_linear": sub.msd_linear,
                "msd_db": sub.msd_db,
            }
            for sub in report.subnetworks
        ],
        "r_agents": [
            {
                "id": entry.agent_id,
                "c": entry.c,
                "msd_linear": entry.msd_linear,
                "msd_db": entry.msd_db,
            }
            for entry in report.r_agents
        ],
    }
    if with_sim:
        result = simulate(config)
        if result.estimate is None:
            raise ConfigError("comparison needs monte_carlo_runs >= 2", field="run.monte_carlo_runs")
        rows = performance.compare(report, result.estimate)
        by_agent = {row.agent_id: row for row in rows}
        payload["comparison"] = [
            {
                "agent": row.agent_id,
                "theory_db": row.theory_db,
                "sim_db": row.sim_db,
                "delta_db": row.delta_db,
                "halfwidth_db": row.halfwidth_db,
                "flagged": row.flagged,
            }
            for row in rows
        ]
        for entry in payload["r_agents"]:
            row = by_agent[entry["id"]]
            entry["sim_db"] = row.sim_db
            entry["delta_db"] = row.delta_db
    return _jsonable(payload)


def write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_simulation_outputs(result: SimulationResult, out_dir: Path) -> list[Path]:
    """Write per-run CSVs, the aggregate learning curve and summary.json."""
    out_dir = Path(out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for traj in result.trajectories:
        path = runs_dir / f"run_{traj.run_index}.csv"
        with path.open("w") as fh:
            engine.write_trajectory_csv(traj, fh)
        written.append(path)

    iters, mean = learning_curve(result.trajectories)
    curve_path = out_dir / "learning_curve.csv"
    with curve_path.open("w") as fh:
        fh.write("iteration,agent_id,mean_sq_error_db\n")
        for t, it in enumerate(iters):
            for k in range(mean.shape[1]):
                value = mean[t, k]
                db = 10.0 * math.log10(value) if value > 0 else float("-inf")
                fh.write(f"{int(it)},{k},{db!r}\n")
    written.append(curve_path)

    summary_path = out_dir / "summary.json"
    write_json(result.payload, summary_path)
    written.append(summary_path)
    return written


def human_summary(payload: dict) -> str:
    """Short console rendering of an analysis or MSD payload (dB to 2 dp)."""
    lines = [f"network: {payload.get('name', '?')}"]
    if "sccs" in payload:
        for scc in payload["sccs"]:
            lines.append(f"  scc {scc['id']} [{scc['type']}]: agents {scc['agents']}")
        if payload.get("strongly_connected"):
            lines.append("  strongly connected: receiving group is empty")
        else:
            lines.append(
                f"  spectral radius of receiving block: {payload['spectral_radius_t_rr']:.6f}"
            )
            for entry in payload.get("influence", []):
                c = ", ".join(f"{v:.4f}" for v in entry["c"])
                lines.append(f"  agent {entry['agent']}: influence c = [{c}]")
    if "subnetworks" in payload and payload["subnetworks"] and "msd_db" in payload["subnetworks"][0]:
        for sub in payload["subnetworks"]:
            db = "0 (linear)" if sub["msd_db"] is None else f"{sub['msd_db']:.2f} dB"
            lines.append(f"  subnetwork {sub['id']} agents {sub['agents']}: MSD {db}")
        for entry in payload["r_agents"]:
            db = "0 (linear)" if entry["msd_db"] is None else f"{entry['msd_db']:.2f} dB"
            extra = ""
            if entry.get("sim_db") is not None:
                extra = f" (sim {entry['sim_db']:.2f} dB, delta {entry['delta_db']:+.2f} dB)"
            lines.append(f"  agent {entry['id']}: MSD {db}{extra}")
    return "\n".join(lines)
