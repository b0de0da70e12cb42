"""Iteration engines and output-selection rules.

Four runners share one trajectory format: the deterministic extrapolation
method (one exact operator evaluation and one prox-mapping per iteration),
its stochastic counterpart (mini-batch oracle estimates, with the previous
estimate reused rather than re-sampled), the randomized block variant (one
block updated per iteration), and a classic stochastic-approximation
baseline without extrapolation.

Oracle randomness is counter-based: iteration t of a run with seed s draws
from a Philox stream keyed by (s, t), so trajectories are reproducible
independently of how mini-batches are evaluated.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import Ball, Box, FeasibleSet, FullSpace, SimplexProduct
from .problems import VIProblem
from .schedules import Schedule

_U64 = 0xFFFFFFFFFFFFFFFF
_PURPOSE_ORACLE = 1
_PURPOSE_BLOCK = 2
_PURPOSE_OUTPUT = 3


def _philox(seed: int, purpose: int, counter: int = 0) -> np.random.Generator:
    key = (int(seed) & _U64) + (purpose << 64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def iteration_rng(seed: int, t: int) -> np.random.Generator:
    """Oracle stream for iteration t of the run with this seed."""
    return _philox(seed, _PURPOSE_ORACLE, counter=t << 192)


def output_rng(seed: int) -> np.random.Generator:
    """Stream for randomized output selection (uniform-index rule)."""
    return _philox(seed, _PURPOSE_OUTPUT)


@dataclass
class RunConfig:
    """Run-level knobs for the harness: policy, budget, batching, seeding."""

    policy: str
    k: int
    seed: int = 0
    batch: int | Callable[[int], int] | None = None
    cadence: int | None = None  # None: every iteration for k <= 1000, else ceil(k/100)
    L: float | None = None
    mu: float | None = None
    sigma: float | None = None
    V1: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.cadence is not None and self.cadence < 1:
            raise ValueError("cadence must be >= 1")

    def resolved_cadence(self) -> int:
        if self.cadence is not None:
            return self.cadence
        return 1 if self.k <= 1000 else math.ceil(self.k / 100)


@dataclass
class Trajectory:
    """Iterates and bookkeeping of one solver run.

    ``xs[t]`` is iterate x_t for t = 0..k+1 with the convention x_0 = x_1;
    ``ops[t]`` is the operator value (exact or sampled) the run used at x_t.
    ``movement_sq[t]`` = ||x_{t+1} - x_t||^2 for t >= 1 and 0 at t = 0.
    Schedule echoes are indexed by t with slot 0 unused (nan).
    """

    policy: str
    xs: np.ndarray
    ops: np.ndarray
    movement_sq: np.ndarray
    gammas: np.ndarray
    lams: np.ndarray
    thetas: np.ndarray
    batch_sizes: np.ndarray
    step_time_ns: np.ndarray
    oracle_calls: int = 0
    operator_evals: int = 0
    block_updates: int = 0
    block_index: Optional[np.ndarray] = None
    num_blocks: int = 1
    seed: Optional[int] = None

    @property
    def k(self) -> int:
        return self.xs.shape[0] - 2

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def iterate(self, t: int) -> np.ndarray:
        return self.xs[t]

    @property
    def final(self) -> np.ndarray:
        return self.xs[-1]

    def oracle_calls_through(self, t: int) -> int:
        return int(self.batch_sizes[: t + 1].sum())


def _alloc(policy: str, x1: np.ndarray, k: int, seed=None, blocks: int = 0) -> Trajectory:
    n = x1.shape[0]
    xs = np.empty((k + 2, n))
    xs[0] = x1
    xs[1] = x1
    return Trajectory(
        policy=policy,
        xs=xs,
        ops=np.empty((k + 1, n)),
        movement_sq=np.zeros(k + 1),
        gammas=np.full(k + 1, np.nan),
        lams=np.full(k + 1, np.nan),
        thetas=np.full(k + 1, np.nan),
        batch_sizes=np.zeros(k + 1, dtype=int),
        step_time_ns=np.zeros(k + 1, dtype=np.int64),
        block_index=np.full(k + 1, -1, dtype=int) if blocks else None,
        num_blocks=max(blocks, 1),
        seed=seed,
    )


def _start_point(problem: VIProblem, x1) -> np.ndarray:
    x = np.asarray(x1, dtype=float).copy()
    if not problem.set.contains(x):
        raise ValueError("start point x1 is not feasible")
    return x


def _table_theta(tab, t: int) -> float:
    lt = float(tab.log_theta[t])
    return math.inf if lt > 700.0 else math.exp(lt)


def oe_run(problem: VIProblem, schedule: Schedule, x1, k: int) -> Trajectory:
    """Deterministic operator-extrapolation run: k iterations, one exact
    operator evaluation and one prox-mapping each."""
    x = _start_point(problem, x1)
    traj = _alloc(schedule.name, x, k, seed=None)
    F = problem.operator
    fs = problem.set
    tab = schedule.table(k)

    F_prev = np.asarray(F(x), dtype=float)
    traj.operator_evals = 1
    F_cur = F_prev
    traj.ops[0] = F_prev
    x_prev = x
    for t in range(1, k + 1):
        tic = time.perf_counter_ns()
        gamma = float(tab.gamma[t])
        lam = float(tab.lam[t])
        traj.ops[t] = F_cur
        g = F_cur + lam * (F_cur - F_prev)
        x_next = fs.project(x - gamma * g)
        traj.xs[t + 1] = x_next
        d = x_next - x
        traj.movement_sq[t] = float(d @ d)
        traj.gammas[t], traj.lams[t], traj.thetas[t] = gamma, lam, _table_theta(tab, t)
        if t < k:
            F_prev, F_cur = F_cur, np.asarray(F(x_next), dtype=float)
            traj.operator_evals += 1
        x_prev, x = x, x_next
        traj.step_time_ns[t] = time.perf_counter_ns() - tic
    return traj


def _resolve_batch(batch, tab, t: int) -> int:
    if batch is None:
        return int(tab.batch[t])
    if callable(batch):
        return int(batch(t))
    return int(batch)


def soe_run(
    problem: VIProblem,
    schedule: Schedule,
    x1,
    k: int,
    seed: int,
    batch: int | Callable[[int], int] | None = None,
) -> Trajectory:
    """Stochastic run: operator values come from the problem's mini-batch
    oracle.  The estimate at x_{t-1} is the stored value from step t-1 (the
    extrapolation reuses the same realization, never a fresh sample)."""
    if problem.oracle is None:
        raise ValueError("problem has no stochastic oracle")
    x = _start_point(problem, x1)
    traj = _alloc(schedule.name, x, k, seed=seed)
    fs = problem.set
    tab = schedule.table(k)

    m1 = _resolve_batch(batch, tab, 1)
    F_prev = np.asarray(problem.oracle(x, iteration_rng(seed, 0), m1), dtype=float)
    traj.oracle_calls = m1
    traj.batch_sizes[1] = m1
    F_cur = F_prev
    traj.ops[0] = F_prev
    for t in range(1, k + 1):
        tic = time.perf_counter_ns()
        gamma = float(tab.gamma[t])
        lam = float(tab.lam[t])
        traj.ops[t] = F_cur
        g = F_cur + lam * (F_cur - F_prev)
        x_next = fs.project(x - gamma * g)
        traj.xs[t + 1] = x_next
        d = x_next - x
        traj.movement_sq[t] = float(d @ d)
        traj.gammas[t], traj.lams[t], traj.thetas[t] = gamma, lam, _table_theta(tab, t)
        if t < k:
            m = _resolve_batch(batch, tab, t + 1)
            F_prev, F_cur = F_cur, np.asarray(
                problem.oracle(x_next, iteration_rng(seed, t), m), dtype=float
            )
            traj.oracle_calls += m
            traj.batch_sizes[t + 1] = m
        x = x_next
        traj.step_time_ns[t] = time.perf_counter_ns() - tic
    return traj


def sa_run(problem: VIProblem, schedule: Schedule, x1, k: int, seed: int,
           batch: int | Callable[[int], int] | None = None) -> Trajectory:
    """Stochastic-approximation baseline: plain prox steps against the latest
    oracle estimate, no extrapolation (the schedule's lambda is ignored)."""
    if problem.oracle is None:
        raise ValueError("problem has no stochastic oracle")
    x = _start_point(problem, x1)
    traj = _alloc(schedule.name, x, k, seed=seed)
    fs = problem.set
    tab = schedule.table(k)
    for t in range(1, k + 1):
        tic = time.perf_counter_ns()
        m = _resolve_batch(batch, tab, t)
        Ft = np.asarray(problem.oracle(x, iteration_rng(seed, t - 1), m), dtype=float)
        traj.oracle_calls += m
        traj.batch_sizes[t] = m
        traj.ops[t] = Ft
        if t == 1:
            traj.ops[0] = Ft
        gamma = float(tab.gamma[t])
        x_next = fs.project(x - gamma * Ft)
        traj.xs[t + 1] = x_next
        d = x_next - x
        traj.movement_sq[t] = float(d @ d)
        traj.gammas[t], traj.lams[t], traj.thetas[t] = gamma, 0.0, 1.0
        x = x_next
        traj.step_time_ns[t] = time.perf_counter_ns() - tic
    return traj


def _block_sets(fs: FeasibleSet, partition: tuple[int, ...]) -> list[FeasibleSet]:
    if isinstance(fs, SimplexProduct):
        if tuple(partition) != fs.block_sizes:
            raise ValueError("block partition must match the simplex-product structure")
        return [SimplexProduct((s,), (d,)) for s, d in zip(fs.block_sizes, fs.demands)]
    if isinstance(fs, FullSpace):
        return [FullSpace(s) for s in partition]
    if isinstance(fs, Box):
        offsets = np.cumsum((0,) + tuple(partition))
        return [
            Box(fs.lower[int(a):int(b)], fs.upper[int(a):int(b)])
            for a, b in zip(offsets[:-1], offsets[1:])
        ]
    if isinstance(fs, Ball):
        if len(partition) != 1:
            raise ValueError("a ball cannot be split into blocks")
        return [fs]
    raise TypeError(f"unsupported set {type(fs).__name__}")


def sboe_run(
    problem: VIProblem,
    schedule: Schedule,
    x1,
    k: int,
    seed: int,
    *,
    recursive_affine: bool = True,
) -> Trajectory:
    """Randomized block run: each iteration draws a block uniformly, updates
    it with one block prox-mapping, and copies the rest.

    For affine operators with ``recursive_affine`` (default) the full
    operator vector is maintained through rank updates restricted to the
    changed block, costing O(n * n_i) per iteration instead of a full
    evaluation; otherwise every iteration re-evaluates F.
    """
    if problem.block_partition is None:
        raise ValueError("problem has no block partition")
    partition = tuple(problem.block_partition)
    b = len(partition)
    slices = problem.block_slices()
    block_sets = _block_sets(problem.set, partition)

    x = _start_point(problem, x1)
    traj = _alloc(schedule.name, x, k, seed=seed, blocks=b)
    F = problem.operator
    tab = schedule.table(k)
    use_recursion = recursive_affine and problem.affine is not None
    # column-major copy so per-block column slices hit the fast matvec path
    G = np.asfortranarray(problem.affine.G) if use_recursion else None

    blocks_drawn = _philox(seed, _PURPOSE_BLOCK).integers(0, b, size=k)
    F_prev = np.asarray(F(x), dtype=float)
    traj.operator_evals = 1
    F_cur = F_prev.copy()
    traj.ops[0] = F_prev
    for t in range(1, k + 1):
        tic = time.perf_counter_ns()
        i = int(blocks_drawn[t - 1])
        sl = slices[i]
        gamma = float(tab.gamma[t])
        lam = float(tab.lam[t])
        traj.ops[t] = F_cur
        g_i = F_cur[sl] + lam * (F_cur[sl] - F_prev[sl])
        x_next = x.copy()
        x_next[sl] = block_sets[i].project(x[sl] - gamma * g_i)
        traj.xs[t + 1] = x_next
        d = x_next[sl] - x[sl]
        traj.movement_sq[t] = float(d @ d)
        traj.gammas[t], traj.lams[t], traj.thetas[t] = gamma, lam, _table_theta(tab, t)
        traj.block_index[t] = i
        if t < k:
            F_prev = F_cur
            if use_recursion:
                F_cur = F_cur + G[:, sl] @ d
                traj.block_updates += 1
            else:
                F_cur = np.asarray(F(x_next), dtype=float)
                traj.operator_evals += 1
        x = x_next
        traj.step_time_ns[t] = time.perf_counter_ns() - tic
    return traj


def run(problem: VIProblem, schedule: Schedule, x1, config: RunConfig,
        *, recursive_affine: bool = True) -> Trajectory:
    """Single-run entry point: dispatch on the schedule family.

    Deterministic policies use the exact-operator engine; block policies the
    randomized block engine; the baseline its plain prox engine; everything
    else the stochastic engine with the config's batch rule.
    """
    from .schedules import (
        OEGmviSchedule,
        OEGsmviSchedule,
        OEMviSchedule,
        SaSchedule,
        SboeGsmviSchedule,
        SboeMviSchedule,
    )

    if isinstance(schedule, (OEGsmviSchedule, OEGmviSchedule, OEMviSchedule)):
        return oe_run(problem, schedule, x1, config.k)
    if isinstance(schedule, (SboeGsmviSchedule, SboeMviSchedule)):
        return sboe_run(problem, schedule, x1, config.k, config.seed,
                        recursive_affine=recursive_affine)
    if isinstance(schedule, SaSchedule):
        return sa_run(problem, schedule, x1, config.k, config.seed, batch=config.batch)
    return soe_run(problem, schedule, x1, config.k, config.seed, batch=config.batch)


# ---------------------------------------------------------------------------
# Output-selection rules
# ---------------------------------------------------------------------------


def select_best_movement(traj: Trajectory) -> tuple[int, np.ndarray]:
    """Index R minimizing ||x_{t+1} - x_t||^2 + ||x_t - x_{t-1}||^2 over
    t = 1..k (ties resolved to the smallest t), and the iterate x_{R+1}."""
    if traj.k < 1:
        raise ValueError("empty trajectory")
    sums = traj.movement_sq[1:] + traj.movement_sq[:-1]
    R = int(np.argmin(sums)) + 1
    return R, traj.xs[R + 1].copy()


def select_uniform_R(traj: Trajectory, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    """R uniform on {2..k}, independent of the iterates; returns x_{R+1}."""
    if traj.k < 2:
        raise ValueError("uniform output selection needs k >= 2")
    R = int(rng.integers(2, traj.k + 1))
    return R, traj.xs[R + 1].copy()


OE_MVI_AVERAGE = "oe-mvi"
SOE_MVI_TAIL_AVERAGE = "soe-mvi-tail"
SBOE_MVI_AVERAGE = "sboe-mvi"


def weighted_average(traj: Trajectory, mode: str, *, b: int | None = None,
                     k: int | None = None) -> np.ndarray:
    """Weighted combinations of the iterates x_2..x_{k+1}.

    ``oe-mvi``: weights gamma_t theta_t.  ``soe-mvi-tail``: weights gamma_t
    restricted to t >= ceil(k/2).  ``sboe-mvi``: weights
    theta_t gamma_t b - theta_{t+1} gamma_{t+1} (b-1), with the final weight
    theta_k gamma_k b.  ``k`` restricts to a prefix of the trajectory.
    """
    k = traj.k if k is None else int(k)
    if not 1 <= k <= traj.k:
        raise ValueError("k out of range")
    gam = traj.gammas[1 : k + 1]
    the = traj.thetas[1 : k + 1]
    if mode == OE_MVI_AVERAGE:
        w = gam * the
    elif mode == SOE_MVI_TAIL_AVERAGE:
        w = np.zeros(k)
        kbar = math.ceil(k / 2)
        w[kbar - 1 :] = gam[kbar - 1 :]
    elif mode == SBOE_MVI_AVERAGE:
        b = traj.num_blocks if b is None else int(b)
        w = np.empty(k)
        w[: k - 1] = the[:-1] * gam[:-1] * b - the[1:] * gam[1:] * (b - 1)
        w[k - 1] = the[-1] * gam[-1] * b
    else:
        raise ValueError(f"unknown averaging mode {mode!r}")
    total = float(w.sum())
    if not total > 0 or np.any(w < 0):
        raise ValueError("averaging weights must be nonnegative with positive sum")
    return (w @ traj.xs[2 : k + 2]) / total
