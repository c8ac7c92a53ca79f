"""Finite-sum saddle-point problem instances.

A problem owns n component couplings whose mean is the coupling Phi, a box
for the primal block and a simplex for the dual block.  The concrete
instances are the robust logistic-regression problem (primal = [weights;
penalty level], dual = sample distribution, chi-square ambiguity) and a
small bilinear instance whose exact saddle point is computable by linear
programming.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit

from .geometry import Box, Simplex


class ProblemError(ValueError):
    """Raised for malformed problem data or arguments."""


class InfeasiblePointError(ProblemError):
    """Raised when an indicator term would be infinite at the query point."""


@dataclass
class PrimalDualPoint:
    """A primal-dual pair with feasibility flags for the box and simplex."""

    x: np.ndarray
    y: np.ndarray
    x_feasible: bool = True
    y_feasible: bool = True

    @classmethod
    def checked(cls, problem: "SaddlePointProblem", x, y,
                atol: float = 1e-9) -> "PrimalDualPoint":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(
            x, y,
            x_feasible=problem.primal_box.contains(x, atol=atol),
            y_feasible=Simplex(problem.dual_dim).contains(y, atol=atol),
        )

    @property
    def feasible(self) -> bool:
        return self.x_feasible and self.y_feasible


@dataclass(frozen=True)
class LipschitzProfile:
    """Component-gradient Lipschitz constants plus norm-compatibility factors."""

    l_xx: float
    l_xy: float
    l_yx: float
    l_yy: float
    c_x: float = 1.0
    c_y: float = 1.0

    def __post_init__(self):
        if min(self.l_xx, self.l_yy) < 0.0:
            raise ProblemError("Lipschitz constants must be nonnegative")
        if self.l_xy <= 0.0 or self.l_yx <= 0.0:
            raise ProblemError("cross constants l_xy and l_yx must be positive")
        if self.c_x < 1.0 or self.c_y < 1.0:
            raise ProblemError("norm-compatibility constants must be >= 1")

    def scaled(self, factor: float) -> "LipschitzProfile":
        return LipschitzProfile(
            self.l_xx * factor, self.l_xy * factor, self.l_yx * factor,
            self.l_yy * factor, self.c_x, self.c_y,
        )


class SaddlePointProblem:
    """Base class: finite-sum coupling over a primal box and a dual simplex."""

    n: int
    primal_dim: int
    dual_dim: int
    primal_box: Box
    dual_simplex: Simplex

    # Cost of one component-gradient evaluation in oracle units (the full-batch
    # view overrides this so deterministic baselines are charged honestly).
    component_cost: int = 1

    def component_value(self, i: int, x, y) -> float:
        raise NotImplementedError

    def grad_x_component(self, i: int, x, y) -> np.ndarray:
        raise NotImplementedError

    def grad_y_component(self, i: int, x, y) -> np.ndarray:
        raise NotImplementedError

    def grad_x_full(self, x, y) -> np.ndarray:
        acc = self.grad_x_component(0, x, y)
        for i in range(1, self.n):
            acc = acc + self.grad_x_component(i, x, y)
        return acc / self.n

    def grad_y_full(self, x, y) -> np.ndarray:
        acc = self.grad_y_component(0, x, y)
        for i in range(1, self.n):
            acc = acc + self.grad_y_component(i, x, y)
        return acc / self.n

    def coupling(self, x, y) -> float:
        """Mean of the component couplings, without feasibility checks."""
        return sum(self.component_value(i, x, y) for i in range(self.n)) / self.n

    def lagrangian(self, x, y) -> float:
        """Coupling value at a feasible point; the indicator parts are zero."""
        self.check_feasible(x, y)
        return self.coupling(x, y)

    def check_feasible(self, x, y, atol: float = 1e-9) -> None:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (self.primal_dim,) or y.shape != (self.dual_dim,):
            raise ProblemError("point dimensions do not match the problem")
        if not self.primal_box.contains(x, atol=atol):
            raise InfeasiblePointError("indicator infinite: x outside the box")
        if not Simplex(self.dual_dim).contains(y, atol=atol):
            raise InfeasiblePointError("indicator infinite: y off the simplex")

    def initial_point(self) -> tuple[np.ndarray, np.ndarray]:
        return self.primal_box.center(), self.dual_simplex.uniform()

    def content_hash(self) -> str:
        raise NotImplementedError


class DroInstance(SaddlePointProblem):
    """Distributionally robust logistic regression with chi-square ambiguity.

    The primal variable is x = [u; lam] where u are the classifier weights in
    a box and lam in [0, lambda_max] prices the divergence constraint; the
    dual variable reweights the n samples on the simplex.  Component i couples
    them through n*y_i*loss_i(u) - lam*((n*y_i - 1)^2/2 - rho/n).
    """

    def __init__(self, features, labels, rho: float, lambda_max: float = 100.0,
                 box_half: float = 10.0):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2:
            raise ProblemError("features must be an n x m matrix")
        n, m = features.shape
        if labels.shape != (n,):
            raise ProblemError("labels must have one entry per sample")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ProblemError("labels must be -1 or +1")
        if rho <= 0.0:
            raise ProblemError("rho must be positive")
        if not np.isfinite(lambda_max) or lambda_max < 0.0:
            raise ProblemError("lambda_max must be finite and nonnegative")
        if not np.isfinite(box_half) or box_half <= 0.0:
            raise ProblemError("box_half must be finite and positive")
        self.features = features
        self.labels = labels
        self.rho = float(rho)
        self.lambda_max = float(lambda_max)
        self.box_half = float(box_half)
        self.n = n
        self.m = m
        self.primal_dim = m + 1
        self.dual_dim = n
        lower = np.concatenate([np.full(m, -box_half), [0.0]])
        upper = np.concatenate([np.full(m, box_half), [lambda_max]])
        self.primal_box = Box(lower, upper)
        self.dual_simplex = Simplex(n)

    def split(self, x) -> tuple[np.ndarray, float]:
        x = np.asarray(x, dtype=float)
        return x[: self.m], float(x[self.m])

    def losses(self, u) -> np.ndarray:
        """Per-sample logistic losses log(1 + exp(-b_i a_i.u)), overflow-safe."""
        margins = self.labels * (self.features @ u)
        return np.logaddexp(0.0, -margins)

    def component_value(self, i: int, x, y) -> float:
        self._check_index(i)
        u, lam = self.split(x)
        y = np.asarray(y, dtype=float)
        n = self.n
        loss_i = float(np.logaddexp(0.0, -self.labels[i] * (self.features[i] @ u)))
        penalty = 0.5 * (n * y[i] - 1.0) ** 2 - self.rho / n
        return n * y[i] * loss_i - lam * penalty

    def grad_x_component(self, i: int, x, y) -> np.ndarray:
        self._check_index(i)
        u, _ = self.split(x)
        n = self.n
        b = self.labels[i]
        a = self.features[i]
        slope = -b * expit(-b * float(a @ u))
        weight = n * float(y[i])
        out = np.empty(self.primal_dim)
        np.multiply(a, weight * slope, out=out[:self.m])
        out[self.m] = -(0.5 * (weight - 1.0) ** 2 - self.rho / n)
        return out

    def grad_y_component(self, i: int, x, y) -> np.ndarray:
        out = np.zeros(self.n)
        out[i] = self.dual_component_value(i, x, y)
        return out

    # The dual gradient of component i is supported on coordinate i alone;
    # the solver's fast path exploits this to avoid n-vector temporaries.
    dual_gradient_sparse = True

    def dual_component_value(self, i: int, x, y) -> float:
        self._check_index(i)
        u, lam = self.split(x)
        n = self.n
        loss_i = float(np.logaddexp(0.0, -self.labels[i] * (self.features[i] @ u)))
        return n * loss_i - lam * n * (n * float(y[i]) - 1.0)

    def grad_x_component_table(self, x, y) -> np.ndarray:
        """All component x-gradients at one point, one row per component."""
        u, _ = self.split(x)
        y = np.asarray(y, dtype=float)
        n = self.n
        slopes = -self.labels * expit(-self.labels * (self.features @ u))
        table = np.empty((n, self.primal_dim))
        table[:, :self.m] = self.features * (n * y * slopes)[:, None]
        table[:, self.m] = -(0.5 * (n * y - 1.0) ** 2 - self.rho / n)
        return table

    def grad_x_full(self, x, y) -> np.ndarray:
        u, _ = self.split(x)
        y = np.asarray(y, dtype=float)
        n = self.n
        slopes = -self.labels * expit(-self.labels * (self.features @ u))
        grad_u = self.features.T @ (y * slopes)
        dev = n * y - 1.0
        grad_lam = -(0.5 / n) * float(dev @ dev) + self.rho / n
        return np.concatenate([grad_u, [grad_lam]])

    def grad_y_full(self, x, y) -> np.ndarray:
        u, lam = self.split(x)
        y = np.asarray(y, dtype=float)
        return self.losses(u) - lam * (self.n * y - 1.0)

    def coupling(self, x, y) -> float:
        u, lam = self.split(x)
        y = np.asarray(y, dtype=float)
        dev = self.n * y - 1.0
        return float(y @ self.losses(u)) - (lam / (2.0 * self.n)) * float(dev @ dev) \
            + lam * self.rho / self.n

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise ProblemError(f"component index {i} out of range [0, {self.n})")

    def initial_point(self) -> tuple[np.ndarray, np.ndarray]:
        # weights at the box center, penalty level starting from zero
        x0 = np.zeros(self.primal_dim)
        return x0, self.dual_simplex.uniform()

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.features.tobytes())
        h.update(self.labels.tobytes())
        h.update(np.array([self.rho, self.lambda_max, self.box_half]).tobytes())
        return h.hexdigest()[:16]


def lipschitz_estimate(problem: DroInstance) -> LipschitzProfile:
    """Analytic Lipschitz bounds, uniform over the feasible set and components.

    The logistic curvature is at most 1/4 and y_i at most 1, so the x-x bound
    is n*max_i||a_i||^2/4.  The mixed bounds collect the u-vs-y and lam-vs-y
    second derivatives, whose worst case over the simplex is n*max_i||a_i||
    and n*(n-1); the y-y bound is lambda_max*n^2.  Euclidean norms throughout,
    so both norm-compatibility constants are 1.
    """
    if not np.isfinite(problem.lambda_max):
        raise ProblemError("lambda_max must be finite for analytic bounds")
    n = problem.n
    row_norms = np.linalg.norm(problem.features, axis=1)
    a_max = float(np.max(row_norms)) if n > 0 else 0.0
    dev_max = float(max(n - 1, 1)) if n > 1 else 0.0
    l_xx = n * a_max**2 / 4.0
    cross = n * float(np.hypot(a_max, dev_max))
    # Assumption-style positivity: any upper bound is valid, so floor the
    # cross constants when the data would make them vanish.
    cross = max(cross, 1e-12)
    l_yy = problem.lambda_max * n**2
    return LipschitzProfile(l_xx=l_xx, l_xy=cross, l_yx=cross, l_yy=l_yy)


def empirical_lipschitz(problem: SaddlePointProblem, samples: int = 2000,
                        seed: int = 0, safety: float = 1.5) -> LipschitzProfile:
    """Sampled gradient-difference ratios, scaled by a safety factor.

    Draws random feasible pairs that differ in one block at a time and records
    the largest ratio ||grad difference|| / ||point difference|| per constant.
    This is the test oracle for the analytic bounds and the configurable
    alternative profile for experiments.
    """
    rng = np.random.default_rng(seed)
    box = problem.primal_box
    n = problem.n
    dual_dim = problem.dual_dim
    m_xx = m_xy = m_yx = m_yy = 0.0

    def rand_x():
        return rng.uniform(box.lower, box.upper)

    def rand_y():
        alpha = rng.choice([0.05, 0.3, 1.0])
        return rng.dirichlet(np.full(dual_dim, alpha))

    for _ in range(samples):
        i = int(rng.integers(n))
        x1, x2 = rand_x(), rand_x()
        y1, y2 = rand_y(), rand_y()
        dx = float(np.linalg.norm(x1 - x2))
        dy = float(np.linalg.norm(y1 - y2))
        if dx > 1e-12:
            gx = problem.grad_x_component(i, x1, y1) - problem.grad_x_component(i, x2, y1)
            m_xx = max(m_xx, float(np.linalg.norm(gx)) / dx)
            gy = problem.grad_y_component(i, x1, y1) - problem.grad_y_component(i, x2, y1)
            m_yx = max(m_yx, float(np.linalg.norm(gy)) / dx)
        if dy > 1e-12:
            gx = problem.grad_x_component(i, x1, y1) - problem.grad_x_component(i, x1, y2)
            m_xy = max(m_xy, float(np.linalg.norm(gx)) / dy)
            gy = problem.grad_y_component(i, x1, y1) - problem.grad_y_component(i, x1, y2)
            m_yy = max(m_yy, float(np.linalg.norm(gy)) / dy)
    return LipschitzProfile(
        l_xx=safety * m_xx,
        l_xy=max(safety * m_xy, 1e-12),
        l_yx=max(safety * m_yx, 1e-12),
        l_yy=safety * m_yy,
    )


def full_gradient_lipschitz(problem: SaddlePointProblem, samples: int = 600,
                            seed: int = 0, safety: float = 1.2) -> LipschitzProfile:
    """Sampled smoothness of the mean coupling's gradients.

    Unlike the component-level constants, these are the quantities that
    govern deterministic analyses; they are typically orders of magnitude
    smaller and make usable experiment schedules.  Exposed through the run
    configuration as the `empirical` profile mode.
    """
    rng = np.random.default_rng(seed)
    box = problem.primal_box
    m_xx = m_xy = m_yx = m_yy = 1e-12

    for _ in range(samples):
        x1 = rng.uniform(box.lower, box.upper)
        x2 = rng.uniform(box.lower, box.upper)
        y1 = rng.dirichlet(np.ones(problem.dual_dim))
        y2 = rng.dirichlet(np.ones(problem.dual_dim))
        dx = float(np.linalg.norm(x1 - x2))
        dy = float(np.linalg.norm(y1 - y2))
        if dx > 1e-12:
            m_xx = max(m_xx, float(np.linalg.norm(
                problem.grad_x_full(x1, y1) - problem.grad_x_full(x2, y1))) / dx)
            m_yx = max(m_yx, float(np.linalg.norm(
                problem.grad_y_full(x1, y1) - problem.grad_y_full(x2, y1))) / dx)
        if dy > 1e-12:
            m_xy = max(m_xy, float(np.linalg.norm(
                problem.grad_x_full(x1, y1) - problem.grad_x_full(x1, y2))) / dy)
            m_yy = max(m_yy, float(np.linalg.norm(
                problem.grad_y_full(x1, y1) - problem.grad_y_full(x1, y2))) / dy)
    return LipschitzProfile(safety * m_xx, safety * m_xy, safety * m_yx, safety * m_yy)


class BilinearInstance(SaddlePointProblem):
    """Finite-sum bilinear coupling x'A_i y + c_i'x - d_i'y over box x simplex.

    The exact saddle point is recovered at construction from the equivalent
    linear program min_{x in box} [cbar'x + max_i (Abar'x - dbar)_i] solved
    with HiGHS; the dual multipliers of the epigraph constraints are the
    optimal simplex point.
    """

    def __init__(self, mats, primal_shifts, dual_shifts, box: Box, seed: int | None = None):
        mats = np.asarray(mats, dtype=float)
        primal_shifts = np.asarray(primal_shifts, dtype=float)
        dual_shifts = np.asarray(dual_shifts, dtype=float)
        n, px, py = mats.shape
        if primal_shifts.shape != (n, px) or dual_shifts.shape != (n, py):
            raise ProblemError("shift arrays do not match the coupling matrices")
        if box.dim != px:
            raise ProblemError("box dimension does not match the primal block")
        self.mats = mats
        self.primal_shifts = primal_shifts
        self.dual_shifts = dual_shifts
        self.n = n
        self.primal_dim = px
        self.dual_dim = py
        self.primal_box = box
        self.dual_simplex = Simplex(py)
        self.seed = seed
        self.mean_mat = mats.mean(axis=0)
        self.mean_primal_shift = primal_shifts.mean(axis=0)
        self.mean_dual_shift = dual_shifts.mean(axis=0)
        self.reference_saddle, self.reference_residual = self._solve_reference()

    def component_value(self, i: int, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(x @ self.mats[i] @ y + self.primal_shifts[i] @ x - self.dual_shifts[i] @ y)

    def grad_x_component(self, i: int, x, y) -> np.ndarray:
        return self.mats[i] @ np.asarray(y, dtype=float) + self.primal_shifts[i]

    def grad_y_component(self, i: int, x, y) -> np.ndarray:
        return self.mats[i].T @ np.asarray(x, dtype=float) - self.dual_shifts[i]

    def grad_x_full(self, x, y) -> np.ndarray:
        return self.mean_mat @ np.asarray(y, dtype=float) + self.mean_primal_shift

    def grad_y_full(self, x, y) -> np.ndarray:
        return self.mean_mat.T @ np.asarray(x, dtype=float) - self.mean_dual_shift

    def coupling(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(x @ self.mean_mat @ y + self.mean_primal_shift @ x
                     - self.mean_dual_shift @ y)

    def _solve_reference(self) -> tuple[tuple[np.ndarray, np.ndarray], float]:
        px, py = self.primal_dim, self.dual_dim
        lo, hi = self.primal_box.lower, self.primal_box.upper
        # variables (x, t): min cbar'x + t  s.t.  Abar'x - t <= dbar, x in box
        c_lp = np.concatenate([self.mean_primal_shift, [1.0]])
        a_ub = np.hstack([self.mean_mat.T, -np.ones((py, 1))])
        b_ub = self.mean_dual_shift.copy()
        bounds = [(float(l), float(h)) for l, h in zip(lo, hi)] + [(None, None)]
        res = linprog(c_lp, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise ProblemError(f"reference LP failed: {res.message}")
        x_star = np.asarray(res.x[:px], dtype=float)
        y_star = np.asarray(-res.ineqlin.marginals, dtype=float)
        y_star = np.maximum(y_star, 0.0)
        total = float(y_star.sum())
        if abs(total - 1.0) > 1e-6:
            raise ProblemError("LP duals do not form a simplex point")
        y_star = y_star / total
        # saddle defect from the two closed-form partial optimizations
        scores = self.mean_mat.T @ x_star - self.mean_dual_shift
        dual_defect = float(np.max(scores) - scores @ y_star)
        slope = self.mean_mat @ y_star + self.mean_primal_shift
        best_x = np.where(slope > 0.0, lo, hi)
        primal_defect = float(slope @ x_star - slope @ best_x)
        return (x_star, y_star), max(dual_defect, 0.0) + max(primal_defect, 0.0)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.mats, self.primal_shifts, self.dual_shifts,
                    self.primal_box.lower, self.primal_box.upper):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def synthetic_bilinear(n: int, primal_dim: int, dual_dim: int, seed: int,
                       box_half: float = 1.0) -> BilinearInstance:
    """Random bounded bilinear instance with an LP-certified saddle point."""
    if primal_dim > 10 or dual_dim > 10:
        raise ProblemError("synthetic bilinear instances are meant to stay small")
    rng = np.random.default_rng(seed)
    mats = rng.uniform(-1.0, 1.0, (n, primal_dim, dual_dim))
    primal_shifts = rng.uniform(-1.0, 1.0, (n, primal_dim))
    dual_shifts = rng.uniform(-1.0, 1.0, (n, dual_dim))
    box = Box(np.full(primal_dim, -box_half), np.full(primal_dim, box_half))
    return BilinearInstance(mats, primal_shifts, dual_shifts, box, seed=seed)


def synthetic_dro(n: int, m: int, seed: int, *, rho: float = 50.0,
                  lambda_max: float = 100.0, box_half: float = 10.0,
                  feature_scale: float = 1.0, label_noise: float = 0.2) -> DroInstance:
    """Random planted-separation logistic instance for benchmarks."""
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n, m)) * (feature_scale / np.sqrt(m))
    planted = rng.standard_normal(m)
    margins = features @ planted + label_noise * rng.standard_normal(n)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    return DroInstance(features, labels, rho=rho, lambda_max=lambda_max,
                       box_half=box_half)


class FullBatchView(SaddlePointProblem):
    """Single-component view of a problem: the full gradients as one component.

    Component evaluations are charged the base problem's n oracle units, so
    deterministic methods running through this view keep honest budgets.
    """

    def __init__(self, base: SaddlePointProblem):
        self.base = base
        self.n = 1
        self.primal_dim = base.primal_dim
        self.dual_dim = base.dual_dim
        self.primal_box = base.primal_box
        self.dual_simplex = base.dual_simplex
        self.component_cost = base.n * base.component_cost

    def component_value(self, i: int, x, y) -> float:
        return self.base.coupling(x, y)

    def grad_x_component(self, i: int, x, y) -> np.ndarray:
        return self.base.grad_x_full(x, y)

    def grad_y_component(self, i: int, x, y) -> np.ndarray:
        return self.base.grad_y_full(x, y)

    def grad_x_full(self, x, y) -> np.ndarray:
        return self.base.grad_x_full(x, y)

    def grad_y_full(self, x, y) -> np.ndarray:
        return self.base.grad_y_full(x, y)

    def coupling(self, x, y) -> float:
        return self.base.coupling(x, y)

    def initial_point(self):
        return self.base.initial_point()

    def content_hash(self) -> str:
        return self.base.content_hash()
