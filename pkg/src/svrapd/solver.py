"""Variance-reduced accelerated primal-dual solver.

Each epoch snapshots the iterate pair, stores the full gradients there, and
runs a batch of stochastic inner steps.  Every inner step combines the
current iterate with the previous epoch's mirror-image average (momentum in
the dual space), forms a variance-reduced dual gradient plus a two-point
extrapolation, and applies the entropy prox on the simplex; the primal side
then does the same with the freshly updated dual point and the box prox.
Epoch averages of iterates and of their mirror images become the next
snapshot and momentum memory.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ENTROPY,
    EUCLIDEAN,
    POSITIVITY_FLOOR,
    BregmanGeometry,
    grad_map,
    momentum_combine,
    prox_box,
    prox_simplex_entropy,
)
from .problems import SaddlePointProblem

_MASK = (1 << 64) - 1

INNER_STEP_UNITS = 5  # 3 fresh dual component gradients + 2 primal per step


class SolverError(RuntimeError):
    pass


class NonFiniteIterateError(SolverError):
    """Raised when an iterate leaves the representable range."""

    def __init__(self, epoch: int, step: int, x, y):
        super().__init__(f"non-finite iterate at epoch {epoch}, inner step {step}")
        self.snapshot = {"epoch": epoch, "step": step, "x": np.array(x), "y": np.array(y)}


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


class RngStream:
    """Counter-based index stream: draws depend only on (seed, epoch, step, side)."""

    _SIDES = {"dual": 0x9E3779B97F4A7C15, "primal": 0xC2B2AE3D27D4EB4F}

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK

    def draw(self, side: str, epoch: int, step: int, n: int) -> int:
        h = _splitmix64(self.seed ^ self._SIDES[side])
        h = _splitmix64(h ^ (epoch & _MASK))
        h = _splitmix64(h ^ (step & _MASK))
        return h % n


@dataclass
class IterateWindow:
    """The current primal-dual pair and the one before it."""

    x: np.ndarray
    y: np.ndarray
    x_prev: np.ndarray
    y_prev: np.ndarray


@dataclass
class EpochState:
    """Snapshot pair, momentum memories, and the snapshot's full gradients."""

    snapshot_x: np.ndarray
    snapshot_y: np.ndarray
    memory_x: np.ndarray
    memory_y: np.ndarray
    full_grad_x: np.ndarray | None = None
    full_grad_y: np.ndarray | None = None


@dataclass
class OracleCounter:
    units: int = 0

    def charge(self, units: int) -> None:
        self.units += units


@dataclass
class RunRow:
    epoch: int
    oracle_units: int
    wall_ms: float
    gap_last: float | None
    gap_ergodic: float | None


@dataclass
class SolveResult:
    snapshot: tuple[np.ndarray, np.ndarray]
    ergodic: tuple[np.ndarray, np.ndarray]
    oracle_units: int
    rows: list[RunRow] = field(default_factory=list)
    epochs_run: int = 0


def initial_state(problem: SaddlePointProblem,
                  geometries: tuple[BregmanGeometry, BregmanGeometry],
                  start: tuple[np.ndarray, np.ndarray] | None = None):
    """Initial snapshot, mirror memories, and iterate window.

    The pre-initial window pair equals the initial pair, so the first
    extrapolation term is exactly zero.
    """
    geom_x, geom_y = geometries
    x0, y0 = start if start is not None else problem.initial_point()
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    state = EpochState(
        snapshot_x=x0.copy(), snapshot_y=y0.copy(),
        memory_x=grad_map(geom_x, x0), memory_y=grad_map(geom_y, y0),
    )
    window = IterateWindow(x=x0.copy(), y=y0.copy(), x_prev=x0.copy(), y_prev=y0.copy())
    return state, window


def refresh_full_gradients(problem: SaddlePointProblem, state: EpochState,
                           counter: OracleCounter | None = None) -> None:
    state.full_grad_x = problem.grad_x_full(state.snapshot_x, state.snapshot_y)
    state.full_grad_y = problem.grad_y_full(state.snapshot_x, state.snapshot_y)
    if counter is not None:
        counter.charge(problem.n * problem.component_cost)


def svrg_grad_y(problem: SaddlePointProblem, j: int, window: IterateWindow,
                epoch: EpochState) -> np.ndarray:
    """Variance-reduced dual gradient: component at the iterate, recentered
    by the same component at the snapshot plus the snapshot full gradient."""
    current = problem.grad_y_component(j, window.x, window.y)
    anchor = problem.grad_y_component(j, epoch.snapshot_x, epoch.snapshot_y)
    return current - anchor + epoch.full_grad_y


def extrapolation_y(problem: SaddlePointProblem, j: int, window: IterateWindow) -> np.ndarray:
    """Two-point dual gradient difference along the iterate window."""
    current = problem.grad_y_component(j, window.x, window.y)
    previous = problem.grad_y_component(j, window.x_prev, window.y_prev)
    return current - previous


def svrg_grad_x(problem: SaddlePointProblem, i: int, x_t: np.ndarray,
                y_next: np.ndarray, epoch: EpochState) -> np.ndarray:
    """Variance-reduced primal gradient, evaluated at the fresh dual point."""
    current = problem.grad_x_component(i, x_t, y_next)
    anchor = problem.grad_x_component(i, epoch.snapshot_x, epoch.snapshot_y)
    return current - anchor + epoch.full_grad_x


def run_epoch(problem: SaddlePointProblem,
              geometries: tuple[BregmanGeometry, BregmanGeometry],
              schedule, k: int, state: EpochState, window: IterateWindow,
              rng: RngStream, counter: OracleCounter,
              max_steps: int | None = None):
    """One outer iteration: snapshot gradients, inner loop, epoch averages.

    Returns the new epoch state and the rolled-over window.  `max_steps`
    trims the inner loop for budget-limited runs; the averages then cover
    the completed steps only.
    """
    geom_x, geom_y = geometries
    params = schedule.epoch(k)
    steps = params.steps if max_steps is None else min(params.steps, max_steps)
    refresh_full_gradients(problem, state, counter)
    if _fast_path_applies(problem, geom_x, geom_y):
        return _run_epoch_sparse_dual(problem, params, k, state, window, rng,
                                      counter, steps)
    g_full_x, g_full_y = state.full_grad_x, state.full_grad_y
    sx, sy = state.snapshot_x, state.snapshot_y

    x_t, y_t = window.x, window.y
    x_prev, y_prev = window.x_prev, window.y_prev
    lower, upper = problem.primal_box.lower, problem.primal_box.upper

    sum_x = np.zeros_like(x_t)
    sum_y = np.zeros_like(y_t)
    sum_mx = np.zeros_like(state.memory_x)
    sum_my = np.zeros_like(state.memory_y)
    step_units = INNER_STEP_UNITS * problem.component_cost

    for t in range(steps):
        j = rng.draw("dual", k, t, problem.n)
        y_hat = momentum_combine(geom_y, y_t, state.memory_y, params.gamma_y)
        gy_cur = problem.grad_y_component(j, x_t, y_t)
        gy_snap = problem.grad_y_component(j, sx, sy)
        gy_prev = problem.grad_y_component(j, x_prev, y_prev)
        ascent = (gy_cur - gy_snap + g_full_y) + (gy_cur - gy_prev)
        y_next = prox_simplex_entropy(y_hat, ascent, params.sigma)

        i = rng.draw("primal", k, t, problem.n)
        x_hat = momentum_combine(geom_x, x_t, state.memory_x, params.gamma_x)
        gx_cur = problem.grad_x_component(i, x_t, y_next)
        gx_snap = problem.grad_x_component(i, sx, sy)
        zeta = gx_cur - gx_snap + g_full_x
        x_next = prox_box(x_hat, zeta, params.tau, lower, upper)

        counter.charge(step_units)
        if not (np.isfinite(x_next).all() and np.isfinite(y_next).all()):
            raise NonFiniteIterateError(k, t, x_next, y_next)

        sum_x += x_next
        sum_y += y_next
        sum_mx += grad_map(geom_x, x_next)
        sum_my += grad_map(geom_y, y_next)
        x_prev, y_prev = x_t, y_t
        x_t, y_t = x_next, y_next

    done = max(steps, 1)
    new_state = EpochState(
        snapshot_x=sum_x / done, snapshot_y=sum_y / done,
        memory_x=sum_mx / done, memory_y=sum_my / done,
    )
    new_window = IterateWindow(x=x_t, y=y_t, x_prev=x_prev, y_prev=y_prev)
    return new_state, new_window, steps


def _fast_path_applies(problem, geom_x, geom_y) -> bool:
    return (geom_x.kind == EUCLIDEAN and geom_y.kind == ENTROPY
            and getattr(problem, "dual_gradient_sparse", False)
            and hasattr(problem, "grad_x_component_table"))


def _run_epoch_sparse_dual(problem, params, k, state, window, rng, counter, steps):
    """Inner loop specialized for a single-coordinate dual gradient.

    Mathematically identical to the generic loop: the dual iterate's log
    image is carried across steps, the mirror/prox composition is fused in
    log space, and the snapshot's component gradients are memoized for the
    epoch (the oracle counter keeps the recompute-on-demand accounting).
    """
    n = problem.n
    g_full_x, g_full_y = state.full_grad_x, state.full_grad_y
    x_t, y_t = window.x, window.y
    x_prev, y_prev = window.x_prev, window.y_prev
    lower, upper = problem.primal_box.lower, problem.primal_box.upper
    gamma_x, gamma_y = params.gamma_x, params.gamma_y
    tau, sigma = params.tau, params.sigma
    memory_x, memory_y = state.memory_x, state.memory_y

    # component values at the snapshot: dual spikes are n * full gradient,
    # primal rows come from one vectorized pass
    snap_dual = n * g_full_y
    snap_x_table = problem.grad_x_component_table(state.snapshot_x, state.snapshot_y)

    log_y = np.log(y_t)
    sum_x = np.zeros_like(x_t)
    sum_y = np.zeros_like(y_t)
    sum_my = np.zeros_like(memory_y)
    step_units = INNER_STEP_UNITS * problem.component_cost

    for t in range(steps):
        j = rng.draw("dual", k, t, n)
        v_cur = problem.dual_component_value(j, x_t, y_t)
        v_prev = problem.dual_component_value(j, x_prev, y_prev)
        ascent = g_full_y.copy()
        ascent[j] += 2.0 * v_cur - snap_dual[j] - v_prev
        # fused momentum + entropy prox in log space
        logits = sigma * ascent
        logits += (1.0 - gamma_y) * (1.0 + log_y)
        logits += gamma_y * memory_y
        logits -= 1.0
        shift = logits.max()
        weights = np.exp(logits - shift)
        total = weights.sum()
        y_next = weights / total
        if y_next.min() < POSITIVITY_FLOOR:
            y_next = np.maximum(y_next, POSITIVITY_FLOOR)
            y_next /= y_next.sum()
            log_y_next = np.log(y_next)
        else:
            log_y_next = logits - (shift + math.log(total))

        i = rng.draw("primal", k, t, n)
        x_hat = (1.0 - gamma_x) * x_t + gamma_x * memory_x
        zeta = problem.grad_x_component(i, x_t, y_next)
        zeta -= snap_x_table[i]
        zeta += g_full_x
        x_next = np.clip(x_hat - tau * zeta, lower, upper)

        counter.charge(step_units)
        if not math.isfinite(float(x_next.sum()) + float(shift) + float(total)):
            raise NonFiniteIterateError(k, t, x_next, y_next)

        sum_x += x_next
        sum_y += y_next
        sum_my += log_y_next
        x_prev, y_prev = x_t, y_t
        x_t, y_t = x_next, y_next
        log_y = log_y_next

    done = max(steps, 1)
    new_state = EpochState(
        snapshot_x=sum_x / done, snapshot_y=sum_y / done,
        memory_x=sum_x / done, memory_y=1.0 + sum_my / done,
    )
    new_window = IterateWindow(x=x_t, y=y_t, x_prev=x_prev, y_prev=y_prev)
    return new_state, new_window, steps


def run(problem: SaddlePointProblem,
        geometries: tuple[BregmanGeometry, BregmanGeometry],
        schedule, epochs: int, seed: int,
        gap_fn=None, budget: int | None = None) -> SolveResult:
    """Run up to `epochs` outer iterations (or until the oracle budget is spent).

    The reported ergodic average weights epoch snapshots uniformly for the
    constant schedule and by inner-loop length for the polynomial one.  When
    `gap_fn` is given, each epoch row records the gap of the last iterate and
    of the running ergodic average.
    """
    if epochs < 1:
        raise SolverError("need at least one epoch")
    rng = RngStream(seed)
    counter = OracleCounter()
    state, window = initial_state(problem, geometries)
    weighted = getattr(schedule, "kind", "constant") == "polynomial"

    erg_x = np.zeros(problem.primal_dim)
    erg_y = np.zeros(problem.dual_dim)
    erg_weight = 0.0
    rows: list[RunRow] = []
    start = time.perf_counter()
    epoch_cost_floor = (problem.n + INNER_STEP_UNITS) * problem.component_cost
    k = 0
    for k in range(1, epochs + 1):
        max_steps = None
        if budget is not None:
            remaining = budget - counter.units
            if remaining < epoch_cost_floor:
                k -= 1
                break
            affordable = (remaining - problem.n * problem.component_cost) \
                // (INNER_STEP_UNITS * problem.component_cost)
            max_steps = int(affordable)
        state, window, steps = run_epoch(problem, geometries, schedule, k,
                                         state, window, rng, counter, max_steps)
        weight = float(steps) if weighted else 1.0
        erg_x += weight * state.snapshot_x
        erg_y += weight * state.snapshot_y
        erg_weight += weight
        gap_last = gap_ergodic = None
        if gap_fn is not None:
            gap_last = gap_fn(window.x, window.y)
            gap_ergodic = gap_fn(erg_x / erg_weight, erg_y / erg_weight)
        wall_ms = (time.perf_counter() - start) * 1e3
        rows.append(RunRow(k, counter.units, wall_ms, gap_last, gap_ergodic))
    if erg_weight == 0.0:
        raise SolverError("budget too small for a single epoch")
    return SolveResult(
        snapshot=(state.snapshot_x, state.snapshot_y),
        ergodic=(erg_x / erg_weight, erg_y / erg_weight),
        oracle_units=counter.units,
        rows=rows,
        epochs_run=k,
    )
