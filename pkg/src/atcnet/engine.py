"""Synchronous adapt-then-combine diffusion over streaming data.

Every iteration, each agent takes a stochastic-gradient step on its own
sample (adapt) and then convexly averages its neighbors' intermediate
iterates with its combination-matrix column (combine); all adapts complete
before any combine. Monte-Carlo runs evolve in one vectorized ensemble but
each (run, agent) pair owns an independent random stream derived from
(master_seed, run_index, agent_id), so results are reproducible and a single
run never depends on how many others execute alongside it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .costs import CostModel
from .errors import DimensionMismatch, Diverged, InsufficientData
from .topology import CombinationMatrix, _frozen

DIVERGENCE_THRESHOLD = 1e12
DEFAULT_STRIDE = 10
DEFAULT_BURN_IN = 0.5
_BLOCK = 1024


def _frozen_int(a):
    out = np.array(a, dtype=int)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class StepSizeProfile:
    """Per-agent step sizes mu_k = tau_k * mu_max with 0 < tau_k <= 1."""

    mu_max: float
    tau: np.ndarray

    def __init__(self, mu_max, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if mu_max < 0:
            raise ValueError("mu_max must be nonnegative")
        if np.any(tau <= 0) or np.any(tau > 1):
            raise ValueError("tau entries must lie in (0, 1]")
        object.__setattr__(self, "mu_max", float(mu_max))
        object.__setattr__(self, "tau", _frozen(tau))

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def mu(self) -> np.ndarray:
        return self.tau * self.mu_max

    def scaled(self, factor: float) -> "StepSizeProfile":
        return StepSizeProfile(self.mu_max * factor, self.tau)


@dataclass
class NetworkState:
    """Current iterates of all agents, one row per agent."""

    iterates: np.ndarray  # (N, M)
    iteration: int = 0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Strided per-agent squared-error record of one run."""

    iterations: np.ndarray        # (T,), 1-based completed-iteration counts
    sq_error: np.ndarray          # (T, N)
    iterates: np.ndarray | None   # (T, N, M) when recorded
    seed: int
    run_index: int
    mu_max: float
    stride: int


@dataclass(frozen=True, eq=False)
class MsdEstimate:
    """Across-run average of time-averaged squared errors after burn-in."""

    per_agent: np.ndarray   # (N,)
    halfwidth: np.ndarray   # (N,), 2 * standard error across runs
    n_runs: int


@dataclass(frozen=True, eq=False)
class LongTermState:
    """State of the constant-Hessian linear error model.

    ``error`` holds the modeled deviation of each agent from its limit
    point; ``hessians`` and ``bias`` are frozen at the limit points, with
    bias_k the negated true gradient there.
    """

    error: np.ndarray     # (N, M)
    hessians: np.ndarray  # (N, M, M)
    bias: np.ndarray      # (N, M)
    iteration: int = 0


def _check_setup(a: CombinationMatrix, models, step_sizes: StepSizeProfile):
    n = a.n
    if len(models) != n:
        raise DimensionMismatch(f"{len(models)} models for {n} agents")
    if step_sizes.n != n:
        raise DimensionMismatch(f"tau has length {step_sizes.n}, expected {n}")
    dims = {m.dimension for m in models}
    if len(dims) != 1:
        raise DimensionMismatch(f"models disagree on dimension: {sorted(dims)}")
    return n, dims.pop()


def atc_step(
    state: NetworkState,
    a: CombinationMatrix,
    models: list[CostModel],
    step_sizes: StepSizeProfile,
    rng: np.random.Generator,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
) -> NetworkState:
    """One synchronous diffusion round: all agents adapt, then all combine."""
    n, m = _check_setup(a, models, step_sizes)
    mu = step_sizes.mu
    psi = np.empty((n, m))
    for k in range(n):
        sample = models[k].draw_sample(rng)
        grad = models[k].stochastic_gradient(state.iterates[k], sample)
        psi[k] = state.iterates[k] - mu[k] * grad
    nxt = a.weights.T @ psi
    iteration = state.iteration + 1
    bad = ~(np.abs(nxt) <= divergence_threshold)  # catches NaN as well
    if bad.any():
        agent = int(np.argwhere(bad)[0][0])
        raise Diverged(agent, iteration)
    return NetworkState(iterates=nxt, iteration=iteration)


def _agent_rngs(master_seed: int, run_index: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng([master_seed, run_index, k]) for k in range(n)]


def run_ensemble(
    a: CombinationMatrix,
    models: list[CostModel],
    step_sizes: StepSizeProfile,
    limit_points: np.ndarray,
    iterations: int,
    n_runs: int,
    master_seed: int,
    stride: int = DEFAULT_STRIDE,
    record_iterates: bool = False,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
) -> list[Trajectory]:
    """Monte-Carlo ensemble of diffusion runs with independent streams.

    Parameters
    ----------
    limit_points : (N, M) array
        Reference point per agent (original order); squared errors are
        measured against these.
    iterations : int
        Number of synchronous rounds, starting from all-zero iterates.
    stride : int
        Squared errors are recorded after every ``stride``-th round.

    Returns one Trajectory per run. Deterministic in (master_seed, config).
    """
    n, m = _check_setup(a, models, step_sizes)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    limit_points = np.asarray(limit_points, dtype=float)
    if limit_points.shape != (n, m):
        raise DimensionMismatch(
            f"limit points have shape {limit_points.shape}, expected {(n, m)}"
        )
    mu = step_sizes.mu
    weights = a.weights

    rngs = [_agent_rngs(master_seed, r, n) for r in range(n_runs)]
    rec_iters = np.arange(stride, iterations + 1, stride)
    n_rec = rec_iters.shape[0]
    sq_rec = np.empty((n_rec, n_runs, n))
    it_rec = np.empty((n_rec, n_runs, n, m)) if record_iterates else None

    x = np.zeros((n_runs, n, m))
    grads = np.empty_like(x)
    blocks: list[tuple] = [()] * n
    rec_at = 0
    for i in range(iterations):
        j = i % _BLOCK
        if j == 0:
            for k in range(n):
                per_run = [models[k].draw_batch(rngs[r][k], _BLOCK) for r in range(n_runs)]
                blocks[k] = tuple(
                    np.stack([fields[f] for fields in per_run])
                    for f in range(len(per_run[0]))
                )
        for k in range(n):
            fields = tuple(arr[:, j] for arr in blocks[k])
            grads[:, k, :] = models[k].gradient_rows(x[:, k, :], fields)
        psi = x - mu[None, :, None] * grads
        x = np.matmul(weights.T, psi)
        bad = ~(np.abs(x) <= divergence_threshold)  # catches NaN as well
        if bad.any():
            run, agent = np.argwhere(bad)[0][:2]
            raise Diverged(int(agent), i + 1, run=int(run))
        if (i + 1) % stride == 0:
            diff = x - limit_points[None]
            sq_rec[rec_at] = np.einsum("rkm,rkm->rk", diff, diff)
            if record_iterates:
                it_rec[rec_at] = x
            rec_at += 1

    out = []
    for r in range(n_runs):
        out.append(
            Trajectory(
                iterations=_frozen_int(rec_iters),
                sq_error=_frozen(sq_rec[:, r, :]),
                iterates=_frozen(it_rec[:, r]) if record_iterates else None,
                seed=master_seed,
                run_index=r,
                mu_max=step_sizes.mu_max,
                stride=stride,
            )
        )
    return out


def run(
    a: CombinationMatrix,
    models: list[CostModel],
    step_sizes: StepSizeProfile,
    limit_points: np.ndarray,
    iterations: int,
    seed: int,
    stride: int = DEFAULT_STRIDE,
    record_iterates: bool = False,
) -> Trajectory:
    """Single diffusion run; equivalent to run 0 of a one-run ensemble."""
    return run_ensemble(
        a,
        models,
        step_sizes,
        limit_points,
        iterations,
        n_runs=1,
        master_seed=seed,
        stride=stride,
        record_iterates=record_iterates,
    )[0]


def long_term_state(models: list[CostModel], limit_points: np.ndarray) -> LongTermState:
    """Freeze Hessians and biases of the linear model at the limit points."""
    limit_points = np.asarray(limit_points, dtype=float)
    n, m = limit_points.shape
    hessians = np.empty((n, m, m))
    bias = np.empty((n, m))
    for k in range(n):
        hessians[k] = models[k].hessian(limit_points[k])
        bias[k] = -models[k].true_gradient(limit_points[k])
    return LongTermState(error=np.zeros((n, m)), hessians=hessians, bias=bias)


def long_term_step(
    lt_state: LongTermState,
    a: CombinationMatrix,
    step_sizes: StepSizeProfile,
    noise_samples: np.ndarray,
) -> LongTermState:
    """One round of the constant-Hessian linear error recursion."""
    mu = step_sizes.mu[:, None]
    err = lt_state.error
    damped = err - mu * np.einsum("kmn,kn->km", lt_state.hessians, err)
    nxt = a.weights.T @ (damped + mu * (noise_samples - lt_state.bias))
    return replace(lt_state, error=nxt, iteration=lt_state.iteration + 1)


@dataclass(frozen=True, eq=False)
class PairedRun:
    """Nonlinear run and linear model driven by one shared sample stream."""

    iterations: np.ndarray
    sq_error: np.ndarray       # (T, N), nonlinear
    sq_error_model: np.ndarray  # (T, N), constant-Hessian model
    max_state_gap: float       # max |nonlinear error - model error| over all steps


def run_paired_long_term(
    a: CombinationMatrix,
    models: list[CostModel],
    step_sizes: StepSizeProfile,
    limit_points: np.ndarray,
    iterations: int,
    seed: int,
    run_index: int = 0,
    noise_at: str = "iterate",
    stride: int = DEFAULT_STRIDE,
    w_init: np.ndarray | None = None,
) -> PairedRun:
    """Run the diffusion recursion and its linear model on shared samples.

    ``noise_at`` selects where each sample's gradient noise is evaluated
    before being fed to the linear model: at the nonlinear run's current
    iterate (exact pairing; cheap only when true gradients are closed-form)
    or at the agent's limit point. The linear model's error state always
    starts at limit_points - w_init, so the two stay paired from step 0;
    starting ``w_init`` at the limit points themselves skips the large
    initial transient when only steady-state behavior matters.
    """
    if noise_at not in ("iterate", "limit_point"):
        raise ValueError("noise_at must be 'iterate' or 'limit_point'")
    n, m = _check_setup(a, models, step_sizes)
    limit_points = np.asarray(limit_points, dtype=float)
    mu = step_sizes.mu
    weights = a.weights

    lt = long_term_state(models, limit_points)
    grad_at_limit = -lt.bias
    x = np.zeros((n, m)) if w_init is None else np.array(w_init, dtype=float)
    lt = replace(lt, error=limit_points - x)

    rngs = _agent_rngs(seed, run_index, n)
    rec_iters = np.arange(stride, iterations + 1, stride)
    sq_nl = np.empty((rec_iters.shape[0], n))
    sq_lt = np.empty_like(sq_nl)
    max_gap = 0.0
    err_lt = lt.error
    blocks: list[tuple] = [()] * n
    psi = np.empty((n, m))
    noise = np.empty((n, m))
    rec_at = 0
    for i in range(iterations):
        j = i % _BLOCK
        if j == 0:
            blocks = [models[k].draw_batch(rngs[k], _BLOCK) for k in range(n)]
        for k in range(n):
            sample = tuple(arr[j] for arr in blocks[k])
            ghat = models[k].stochastic_gradient(x[k], sample)
            psi[k] = x[k] - mu[k] * ghat
            if noise_at == "iterate":
                noise[k] = ghat - models[k].true_gradient(x[k])
            else:
                noise[k] = (
                    models[k].stochastic_gradient(limit_points[k], sample)
                    - grad_at_limit[k]
                )
        x = weights.T @ psi
        damped = err_lt - mu[:, None] * np.einsum("kmn,kn->km", lt.hessians, err_lt)
        err_lt = weights.T @ (damped + mu[:, None] * (noise - lt.bias))
        gap = np.abs((limit_points - x) - err_lt).max()
        if gap > max_gap:
            max_gap = float(gap)
        if (i + 1) % stride == 0:
            d_nl = x - limit_points
            sq_nl[rec_at] = np.einsum("km,km->k", d_nl, d_nl)
            sq_lt[rec_at] = np.einsum("km,km->k", err_lt, err_lt)
            rec_at += 1

    return PairedRun(
        iterations=_frozen_int(rec_iters),
        sq_error=_frozen(sq_nl),
        sq_error_model=_frozen(sq_lt),
        max_state_gap=max_gap,
    )


def estimate_msd(
    trajectories: list[Trajectory],
    burn_in_fraction: float = DEFAULT_BURN_IN,
) -> MsdEstimate:
    """Average post-burn-in squared errors within runs, then across runs."""
    if len(trajectories) < 2:
        raise InsufficientData("MSD estimation needs at least 2 runs")
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    t = trajectories[0].sq_error.shape[0]
    for traj in trajectories:
        if traj.sq_error.shape != trajectories[0].sq_error.shape:
            raise DimensionMismatch("trajectories have inconsistent shapes")
    start = int(np.floor(burn_in_fraction * t))
    per_run = np.stack([traj.sq_error[start:].mean(axis=0) for traj in trajectories])
    estimate = per_run.mean(axis=0)
    stderr = per_run.std(axis=0, ddof=1) / np.sqrt(len(trajectories))
    return MsdEstimate(
        per_agent=_frozen(estimate),
        halfwidth=_frozen(2.0 * stderr),
        n_runs=len(trajectories),
    )


def write_trajectory_csv(trajectory: Trajectory, fileobj) -> None:
    """Write one run as CSV rows ``iteration,agent_id,sq_error``."""
    fileobj.write("iteration,agent_id,sq_error\n")
    n = trajectory.sq_error.shape[1]
    for t, it in enumerate(trajectory.iterations):
        for k in range(n):
            fileobj.write(f"{int(it)},{k},{float(trajectory.sq_error[t, k])!r}\n")
