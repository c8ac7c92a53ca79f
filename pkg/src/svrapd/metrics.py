"""Gap evaluation against a computed reference saddle point.

The reported metric is the difference of Lagrangian values at the fixed
reference pair, L(x, y*) - L(x*, y), which is nonnegative for feasible
points when (x*, y*) is an exact saddle.  References are computed by the
deterministic full-gradient solver, cached by problem hash, and persisted
as plain-text artifacts at full decimal precision.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .baselines import apd_full_solve, dro_warm_start
from .problems import DroInstance, PrimalDualPoint, SaddlePointProblem

DEFAULT_REFERENCE_TOL = 1e-9

_CACHE: dict[str, "ReferenceSaddle"] = {}


class MetricsError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReferenceSaddle:
    point: PrimalDualPoint
    residual: float
    provenance: str


def clear_cache() -> None:
    _CACHE.clear()


def _warm_start(problem: SaddlePointProblem):
    """Best available cheap starting pair; dual floored for the entropy maps."""
    stored = getattr(problem, "reference_saddle", None)
    if stored is not None:
        x0, y0 = stored
    elif isinstance(problem, DroInstance):
        x0, y0 = dro_warm_start(problem)
    else:
        return None
    y0 = np.maximum(np.asarray(y0, float), 1e-12 / problem.dual_dim)
    return np.asarray(x0, float), y0 / y0.sum()


def saddle_oracle(problem: SaddlePointProblem, geometries,
                  tol: float = DEFAULT_REFERENCE_TOL, max_iters: int = 200000,
                  start=None, profile=None) -> ReferenceSaddle:
    """Compute (and cache) a reference saddle via the full-gradient solver."""
    key = f"{problem.content_hash()}:{tol:.17g}"
    if key in _CACHE:
        return _CACHE[key]
    if start is None:
        start = _warm_start(problem)
    result = apd_full_solve(problem, geometries, tol, max_iters=max_iters,
                            start=start, profile=profile)
    if not result.converged:
        raise MetricsError(
            f"reference solve did not converge: residual {result.residual:.3e} > {tol:.3e}"
        )
    provenance = hashlib.sha256(
        f"{problem.content_hash()}|{tol:.17g}|{result.iterations}".encode()
    ).hexdigest()[:16]
    ref = ReferenceSaddle(result.point, result.residual, provenance)
    _CACHE[key] = ref
    return ref


@dataclass
class GapEvaluator:
    """Callable gap metric with clamp accounting.

    Small negative values (down to -10x the reference residual) are rounded
    up to zero and counted; anything more negative is returned as-is so a
    bad reference stays visible.
    """

    problem: SaddlePointProblem
    reference: ReferenceSaddle
    clamped: int = 0

    def __call__(self, x, y) -> float:
        return self.gap(PrimalDualPoint(np.asarray(x, float), np.asarray(y, float)))

    def gap(self, candidate: PrimalDualPoint) -> float:
        ref = self.reference.point
        value = self.problem.lagrangian(candidate.x, ref.y) \
            - self.problem.lagrangian(ref.x, candidate.y)
        if value < 0.0:
            floor = -10.0 * max(self.reference.residual, 1e-300)
            if value >= floor:
                self.clamped += 1
                return 0.0
        return value


def gap(problem: SaddlePointProblem, candidate: PrimalDualPoint,
        ref: ReferenceSaddle) -> float:
    """One-off gap evaluation (see GapEvaluator for the clamp convention)."""
    return GapEvaluator(problem, ref).gap(candidate)


def fit_loglog_slope(points) -> float | None:
    """Least-squares slope of log(value) against log(index).

    Zero or negative values are floored at 1e-16 before the log; returns
    None when fewer than two points are available.
    """
    pairs = [(k, v) for k, v in points if k > 0 and v is not None]
    if len(pairs) < 2:
        return None
    ks = np.log([float(k) for k, _ in pairs])
    vs = np.log([max(float(v), 1e-16) for _, v in pairs])
    design = np.vstack([ks, np.ones_like(ks)]).T
    coef, *_ = np.linalg.lstsq(design, vs, rcond=None)
    return float(coef[0])


def save_reference(path, ref: ReferenceSaddle) -> None:
    """Persist a reference as a text artifact at full decimal precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("svrapd-reference-saddle v1\n")
        fh.write(f"residual = {ref.residual:.17g}\n")
        fh.write(f"provenance = {ref.provenance}\n")
        fh.write("x = " + " ".join(f"{v:.17g}" for v in ref.point.x) + "\n")
        fh.write("y = " + " ".join(f"{v:.17g}" for v in ref.point.y) + "\n")


def load_reference(path) -> ReferenceSaddle:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "svrapd-reference-saddle v1":
        raise MetricsError(f"not a reference artifact: {path}")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition(" = ")
        fields[key] = value
    point = PrimalDualPoint(
        np.array([float(v) for v in fields["x"].split()]),
        np.array([float(v) for v in fields["y"].split()]),
    )
    return ReferenceSaddle(point, float(fields["residual"]), fields["provenance"])
