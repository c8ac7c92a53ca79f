"""Reference solvers: stochastic mirror descent, stochastic mirror-prox, and
a deterministic full-gradient solver used both as a baseline and as the
engine behind the reference-saddle computation.

All three share the solver's geometries (Euclidean box primal, entropy
simplex dual) so benchmark differences isolate the algorithms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import BregmanGeometry, prox_box, prox_simplex_entropy
from .problems import (
    FullBatchView,
    PrimalDualPoint,
    SaddlePointProblem,
    empirical_lipschitz,
)
from .schedule import constant_schedule
from .solver import (
    OracleCounter,
    RngStream,
    RunRow,
    SolveResult,
    initial_state,
    run_epoch,
)

STEP_GRID = (0.01, 0.1, 1.0)

SMD_STEP_UNITS = 2
SMP_STEP_UNITS = 4


class BaselineError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    base_step: float
    budget: int
    seed: int

    def __post_init__(self):
        if self.method not in ("smd", "smp", "apd-full"):
            raise BaselineError(f"unknown baseline method {self.method!r}")
        if self.base_step <= 0.0:
            raise BaselineError("base step must be positive")
        if self.budget < 1:
            raise BaselineError("budget must be at least 1")


class IndexSampler:
    """Deterministic stream of component indices for the baselines."""

    def __init__(self, seed: int):
        self._rng = RngStream(seed)
        self._count = 0

    def next_index(self, n: int) -> int:
        i = self._rng.draw("dual", 1, self._count, n)
        self._count += 1
        return i


def smd_step(problem: SaddlePointProblem, geometries, state: PrimalDualPoint,
             step: float, sampler: IndexSampler,
             counter: OracleCounter | None = None) -> PrimalDualPoint:
    """Simultaneous mirror steps with one sampled component gradient pair."""
    if step == 0.0:
        return PrimalDualPoint(state.x.copy(), state.y.copy())
    j = sampler.next_index(problem.n)
    grad_x = problem.grad_x_component(j, state.x, state.y)
    grad_y = problem.grad_y_component(j, state.x, state.y)
    if counter is not None:
        counter.charge(SMD_STEP_UNITS * problem.component_cost)
    box = problem.primal_box
    x_new = prox_box(state.x, grad_x, step, box.lower, box.upper)
    y_new = prox_simplex_entropy(state.y, grad_y, step)
    return PrimalDualPoint(x_new, y_new)


def smp_step(problem: SaddlePointProblem, geometries, state: PrimalDualPoint,
             step: float, sampler: IndexSampler,
             counter: OracleCounter | None = None) -> PrimalDualPoint:
    """Extragradient: a half-step to a midpoint, then a full step using the
    midpoint's gradients with a fresh sample."""
    if step == 0.0:
        return PrimalDualPoint(state.x.copy(), state.y.copy())
    box = problem.primal_box
    j = sampler.next_index(problem.n)
    grad_x = problem.grad_x_component(j, state.x, state.y)
    grad_y = problem.grad_y_component(j, state.x, state.y)
    x_mid = prox_box(state.x, grad_x, step, box.lower, box.upper)
    y_mid = prox_simplex_entropy(state.y, grad_y, step)
    jj = sampler.next_index(problem.n)
    grad_x_mid = problem.grad_x_component(jj, x_mid, y_mid)
    grad_y_mid = problem.grad_y_component(jj, x_mid, y_mid)
    if counter is not None:
        counter.charge(SMP_STEP_UNITS * problem.component_cost)
    x_new = prox_box(state.x, grad_x_mid, step, box.lower, box.upper)
    y_new = prox_simplex_entropy(state.y, grad_y_mid, step)
    return PrimalDualPoint(x_new, y_new)


def run_stochastic_baseline(problem: SaddlePointProblem, geometries, method: str,
                            base_step: float, budget: int, seed: int,
                            gap_fn=None, log_interval: int | None = None) -> SolveResult:
    """Run SMD or SMP to the oracle budget with a c/sqrt(t+1) step rule."""
    if method not in ("smd", "smp"):
        raise BaselineError(f"not a stochastic baseline: {method!r}")
    stepper = smd_step if method == "smd" else smp_step
    unit_cost = (SMD_STEP_UNITS if method == "smd" else SMP_STEP_UNITS) * problem.component_cost
    sampler = IndexSampler(seed)
    counter = OracleCounter()
    x0, y0 = problem.initial_point()
    state = PrimalDualPoint(np.asarray(x0, float), np.asarray(y0, float))
    avg_x = np.zeros_like(state.x)
    avg_y = np.zeros_like(state.y)
    rows: list[RunRow] = []
    if log_interval is None:
        log_interval = max(1, (budget // unit_cost) // 128)
    start = time.perf_counter()
    t = 0
    while counter.units + unit_cost <= budget:
        step = base_step / np.sqrt(t + 1.0)
        state = stepper(problem, geometries, state, step, sampler, counter)
        avg_x += state.x
        avg_y += state.y
        t += 1
        if t % log_interval == 0 or counter.units + unit_cost > budget:
            gap_last = gap_erg = None
            if gap_fn is not None:
                gap_last = gap_fn(state.x, state.y)
                gap_erg = gap_fn(avg_x / t, avg_y / t)
            rows.append(RunRow(t, counter.units, (time.perf_counter() - start) * 1e3,
                               gap_last, gap_erg))
    if t == 0:
        raise BaselineError("budget too small for a single step")
    return SolveResult(
        snapshot=(state.x, state.y),
        ergodic=(avg_x / t, avg_y / t),
        oracle_units=counter.units,
        rows=rows,
        epochs_run=t,
    )


def tune_baseline(problem: SaddlePointProblem, geometries, method: str,
                  budget: int, seed: int, gap_fn, grid=STEP_GRID):
    """Run the full budget for each grid step and keep the best final gap."""
    best = None
    for c in grid:
        result = run_stochastic_baseline(problem, geometries, method, c, budget,
                                         seed, gap_fn=gap_fn)
        final = result.rows[-1].gap_ergodic
        if best is None or final < best[1]:
            best = (c, final, result)
    return best[0], best[2]


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.size + 1)
    mask = u - (css - 1.0) / ks > 0
    rho = ks[mask][-1]
    theta = (css[mask][-1] - 1.0) / rho
    return np.maximum(v - theta, 0.0)


def dro_warm_start(problem) -> tuple[np.ndarray, np.ndarray]:
    """Approximate saddle of the robust logistic problem for warm starts.

    For fixed (u, lam) the best sample weights are a Euclidean projection of
    losses/(lam*n) + 1/n onto the simplex, so the outer minimization runs
    box-constrained L-BFGS on the reduced function with its partial gradient
    at the inner maximizer, then a couple of Newton polish steps on the free
    coordinates.  The result only seeds the certified full-gradient solve.
    """
    from scipy.optimize import minimize

    n = problem.n
    box = problem.primal_box

    def inner(x):
        u, lam = problem.split(x)
        lam_eff = max(lam, 1e-9)
        y = _project_simplex(problem.losses(u) / (lam_eff * n) + 1.0 / n)
        y = np.maximum(y, 1e-12 / n)
        return y / y.sum()

    def grad(x):
        return problem.grad_x_full(x, inner(x))

    def value_grad(x):
        y = inner(x)
        return problem.coupling(x, y), problem.grad_x_full(x, y)

    # Start the penalty level mid-range and keep it off the lam = 0 cliff,
    # where the inner maximizer degenerates to a vertex; the Newton polish
    # below works on the true box.
    x0, _ = problem.initial_point()
    lam_floor = min(1e-6, problem.lambda_max)
    if problem.lambda_max > 0.0:
        x0 = x0.copy()
        x0[-1] = 0.5 * problem.lambda_max
    outer_bounds = list(zip(box.lower, box.upper))
    if problem.lambda_max > 0.0:
        outer_bounds[-1] = (lam_floor, problem.lambda_max)
    res = minimize(value_grad, x0, jac=True, method="L-BFGS-B",
                   bounds=outer_bounds,
                   options={"maxiter": 4000, "ftol": 1e-16, "gtol": 1e-11})
    x = np.clip(res.x, box.lower, box.upper)
    # Newton polish on the reduced function over the inactive coordinates
    d = x.size
    for _ in range(3):
        g = grad(x)
        free = (x > box.lower + 1e-9) & (x < box.upper - 1e-9)
        residual = np.linalg.norm(x - prox_box(x, g, 1.0, box.lower, box.upper))
        if residual < 1e-13 or not free.any():
            break
        idx = np.where(free)[0]
        h = 1e-6
        hess = np.zeros((idx.size, idx.size))
        for col, jdim in enumerate(idx):
            e = np.zeros(d)
            e[jdim] = h
            hess[:, col] = (grad(x + e) - grad(x - e))[idx] / (2.0 * h)
        hess = 0.5 * (hess + hess.T) + 1e-9 * np.eye(idx.size)
        try:
            step = np.linalg.solve(hess, -g[idx])
        except np.linalg.LinAlgError:
            break
        trial = x.copy()
        trial[idx] += step
        trial = np.clip(trial, box.lower, box.upper)
        if np.linalg.norm(trial - prox_box(trial, grad(trial), 1.0, box.lower, box.upper)) \
                >= residual:
            break
        x = trial
    return x, inner(x)


def optimality_residual(problem: SaddlePointProblem, x: np.ndarray, y: np.ndarray,
                        grad_x: np.ndarray | None = None,
                        grad_y: np.ndarray | None = None) -> float:
    """Unit-step prox fixed-point residual on both blocks."""
    if grad_x is None:
        grad_x = problem.grad_x_full(x, y)
    if grad_y is None:
        grad_y = problem.grad_y_full(x, y)
    box = problem.primal_box
    rx = x - prox_box(x, grad_x, 1.0, box.lower, box.upper)
    ry = y - prox_simplex_entropy(y, grad_y, 1.0)
    return max(float(np.linalg.norm(rx)), float(np.linalg.norm(ry)))


@dataclass
class FullSolveResult:
    point: PrimalDualPoint
    residual: float
    converged: bool
    iterations: int
    oracle_units: int
    rows: list[RunRow] = field(default_factory=list)


def apd_full_solve(problem: SaddlePointProblem, geometries, tol: float,
                   max_iters: int = 200000, *, start=None, gbar: float = 0.9,
                   t_inner: float = 1.0, profile=None, budget: int | None = None,
                   gap_fn=None, log_interval: int = 0,
                   check_every: int = 5) -> FullSolveResult:
    """Deterministic full-gradient solve to a prox fixed-point residual.

    Treats the whole sum as one batch (the variance-reduction corrections
    cancel identically) and runs the constant schedule with n = 1 until the
    residual drops below `tol`, the iteration cap is hit, or the oracle
    budget is exhausted.  Returns the best point seen with a convergence
    flag; oracle units are charged at the underlying problem's full-gradient
    cost, including the periodic residual checks.
    """
    if tol <= 0.0:
        raise BaselineError("tol must be positive")
    view = FullBatchView(problem)
    if profile is None:
        profile = empirical_lipschitz(view, samples=400, seed=0)
    schedule = constant_schedule(profile, 1, t_inner, gbar, gbar)
    state, window = initial_state(view, geometries, start=start)
    rng = RngStream(0)
    counter = OracleCounter()
    best_point = PrimalDualPoint(window.x.copy(), window.y.copy())
    best_residual = np.inf
    rows: list[RunRow] = []
    start_time = time.perf_counter()
    epoch_units = (view.n + 5) * view.component_cost
    converged = False
    iteration = 0
    last_logged = 0

    def log_row():
        nonlocal last_logged
        gap_last = gap_fn(window.x, window.y) if gap_fn else None
        rows.append(RunRow(iteration, counter.units,
                           (time.perf_counter() - start_time) * 1e3,
                           gap_last, gap_last))
        last_logged = iteration

    while True:
        gx = view.grad_x_full(window.x, window.y)
        gy = view.grad_y_full(window.x, window.y)
        counter.charge(view.component_cost)
        residual = optimality_residual(view, window.x, window.y, gx, gy)
        if residual < best_residual:
            best_residual = residual
            best_point = PrimalDualPoint(window.x.copy(), window.y.copy())
        if residual <= tol:
            converged = True
            break
        if iteration >= max_iters:
            break
        if budget is not None and counter.units + epoch_units + view.component_cost > budget:
            break
        for _ in range(min(check_every, max_iters - iteration)):
            iteration += 1
            state, window, _ = run_epoch(view, geometries, schedule, iteration,
                                         state, window, rng, counter)
            if log_interval and (iteration % log_interval == 0):
                log_row()
            if budget is not None and counter.units + epoch_units + view.component_cost > budget:
                break
    if log_interval and iteration > last_logged:
        log_row()
    return FullSolveResult(
        point=best_point,
        residual=best_residual,
        converged=converged,
        iterations=iteration,
        oracle_units=counter.units,
        rows=rows,
    )
