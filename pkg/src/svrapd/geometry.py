"""Mirror-map geometries for the primal box and the dual simplex.

Two distance-generating functions are supported: the squared Euclidean norm
(identity mirror maps, used on the primal box) and negative entropy on the
positive orthant (log/exp mirror maps, used on the dual simplex).  The
entropy conjugate is taken over the orthant, so the gradient maps invert
each other exactly; the simplex constraint is enforced only inside the
entropy prox.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EUCLIDEAN = "euclidean"
ENTROPY = "negative-entropy"

# Dual iterates are floored here after each prox so log/exp maps stay finite;
# in exact arithmetic the entropy prox keeps iterates interior and the floor
# only absorbs floating-point underflow.
POSITIVITY_FLOOR = 1e-15

# exp(g - 1) overflows near g = 710; reject inputs before that point.
DEFAULT_EXP_LIMIT = 700.0


class GeometryError(ValueError):
    """Raised for domain violations in mirror-map evaluations."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with per-coordinate bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise GeometryError("box bounds must be 1-d arrays of equal length")
        if np.any(lower > upper):
            raise GeometryError("box has lower > upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, x: np.ndarray, atol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class Simplex:
    """Probability simplex of a given dimension."""

    dim: int

    def contains(self, y: np.ndarray, atol: float = 1e-12) -> bool:
        return bool(np.all(y >= -atol) and abs(float(np.sum(y)) - 1.0) <= atol)

    def uniform(self) -> np.ndarray:
        return np.full(self.dim, 1.0 / self.dim)


@dataclass(frozen=True)
class BregmanGeometry:
    """A distance-generating function together with its feasible set."""

    kind: str
    dimension: int
    domain: Box | Simplex | None = field(default=None)

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, ENTROPY):
            raise GeometryError(f"unknown geometry kind: {self.kind!r}")
        if self.dimension <= 0:
            raise GeometryError("dimension must be positive")


def euclidean_box_geometry(lower, upper) -> BregmanGeometry:
    box = Box(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    return BregmanGeometry(EUCLIDEAN, box.dim, box)


def entropy_simplex_geometry(dim: int) -> BregmanGeometry:
    return BregmanGeometry(ENTROPY, dim, Simplex(dim))


def _as_vector(v, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (dim,):
        raise GeometryError(f"{name} has shape {arr.shape}, expected ({dim},)")
    return arr


def divergence(geom: BregmanGeometry, u, ubar) -> float:
    """Bregman divergence D(u, ubar) of the geometry's generating function.

    `ubar` must be strictly interior (all coordinates positive for entropy).
    Returns 0 exactly when u == ubar.
    """
    u = _as_vector(u, geom.dimension, "u")
    ubar = _as_vector(ubar, geom.dimension, "ubar")
    if geom.kind == EUCLIDEAN:
        d = u - ubar
        return 0.5 * float(d @ d)
    if np.any(ubar <= 0.0):
        raise GeometryError("entropy divergence needs strictly positive ubar")
    if np.any(u < 0.0):
        raise GeometryError("entropy divergence needs nonnegative u")
    # sum u*log(u/ubar) - u + ubar, with 0 log 0 = 0
    ratio_term = np.where(u > 0.0, u * (np.log(np.maximum(u, POSITIVITY_FLOOR)) - np.log(ubar)), 0.0)
    return float(np.sum(ratio_term) - np.sum(u) + np.sum(ubar))


def grad_map(geom: BregmanGeometry, u) -> np.ndarray:
    """Mirror map into the gradient space: identity, or 1 + log(u) under entropy."""
    u = _as_vector(u, geom.dimension, "u")
    if geom.kind == EUCLIDEAN:
        return u.copy()
    if np.any(u <= 0.0):
        raise GeometryError("entropy mirror map needs strictly positive input")
    return 1.0 + np.log(u)


def grad_map_inverse(geom: BregmanGeometry, g, exp_limit: float = DEFAULT_EXP_LIMIT) -> np.ndarray:
    """Inverse mirror map: identity, or exp(g - 1) under entropy.

    The entropy conjugate is taken over the positive orthant, so the output
    is not renormalized onto the simplex.  Coordinates of `g` above
    `exp_limit` raise a GeometryError instead of overflowing.
    """
    g = _as_vector(g, geom.dimension, "g")
    if geom.kind == EUCLIDEAN:
        return g.copy()
    if np.any(g > exp_limit):
        raise GeometryError(f"conjugate map input exceeds exp limit {exp_limit}")
    return np.exp(g - 1.0)


def momentum_combine(geom: BregmanGeometry, current, memory, gamma: float) -> np.ndarray:
    """Pull back the convex combination (1-gamma) * grad_map(current) + gamma * memory."""
    if not 0.0 < gamma <= 1.0:
        raise GeometryError(f"gamma must lie in (0, 1], got {gamma}")
    memory = _as_vector(memory, geom.dimension, "memory")
    g = (1.0 - gamma) * grad_map(geom, current) + gamma * memory
    return grad_map_inverse(geom, g)


def prox_box(xhat, linear, tau: float, lower, upper) -> np.ndarray:
    """Euclidean prox of a linear term over a box: clip(xhat - tau * linear)."""
    if tau <= 0.0:
        raise GeometryError(f"tau must be positive, got {tau}")
    xhat = np.asarray(xhat, dtype=float)
    linear = np.asarray(linear, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if not (xhat.shape == linear.shape == lower.shape == upper.shape):
        raise GeometryError("prox_box arguments must share one shape")
    return np.clip(xhat - tau * linear, lower, upper)


def prox_simplex_entropy(yhat, ascent, sigma: float) -> np.ndarray:
    """Entropy prox of an ascent direction over the simplex.

    Maximizes <ascent, y> - D(y, yhat) / sigma over the simplex; the solution
    is the exponentially reweighted point y_i ∝ yhat_i * exp(sigma * ascent_i),
    computed with a max-shift so the exponentials never overflow.  `yhat` must
    be strictly positive but need not sum to one.
    """
    if sigma <= 0.0:
        raise GeometryError(f"sigma must be positive, got {sigma}")
    yhat = np.asarray(yhat, dtype=float)
    ascent = np.asarray(ascent, dtype=float)
    if yhat.shape != ascent.shape:
        raise GeometryError("prox_simplex_entropy arguments must share one shape")
    if np.any(yhat <= 0.0):
        raise GeometryError("prox_simplex_entropy needs strictly positive yhat")
    logits = sigma * ascent + np.log(yhat)
    logits -= np.max(logits)
    weights = np.exp(logits)
    y = weights / np.sum(weights)
    y = np.maximum(y, POSITIVITY_FLOOR)
    return y / np.sum(y)
