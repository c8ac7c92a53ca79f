"""Step-size and momentum schedules with certified step-size conditions.

Two constructors are provided: a constant schedule (one parameter set for
every epoch, inner length proportional to n) and a polynomial schedule
(epoch lengths growing as (k+1)^2 with decaying momentum).  Both start from
the closed-form nominal values and then certify the step-size conditions by
solving for an admissible design parameter eta: each condition is linear or
quadratic in eta, so the admissible set is an explicit interval.  When the
nominal step sizes admit no eta at all (which happens for most profiles),
tau and sigma are shrunk by the largest feasible factor, found by bisection,
before eta is chosen with slack on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .problems import LipschitzProfile


class ScheduleError(ValueError):
    """Raised when no admissible design parameter exists."""


_BISECT_STEPS = 60
_REL_TOL = 1e-9


def smoothness_aggregates(profile: LipschitzProfile) -> tuple[float, float]:
    """The combined constants L_x, L_y driving both step-size branches."""
    lx = math.sqrt(6.0 * profile.c_x * profile.l_xx**2 + 10.0 * profile.c_y * profile.l_yx**2)
    ly = math.sqrt(6.0 * profile.c_x * profile.l_xy**2 + 10.0 * profile.c_y * profile.l_yy**2)
    return lx, ly


@dataclass(frozen=True)
class EpochParams:
    """Per-epoch solver parameters plus the certified design parameter."""

    tau: float
    sigma: float
    gamma_x: float
    gamma_y: float
    steps: int
    eta: float


@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -_REL_TOL * max(1.0, abs(self.lhs), abs(self.rhs))


@dataclass(frozen=True)
class ValidationReport:
    epoch: int
    inequalities: tuple[Inequality, ...]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(ineq.passed for ineq in self.inequalities)


def _ratio(num: float, den: float) -> float:
    """num/den with the 0^2/0 = 0 convention used for vanishing constants."""
    if num == 0.0:
        return 0.0
    if den == 0.0:
        raise ScheduleError("division by zero with a nonzero numerator")
    return num / den


def _eta_interval(profile: LipschitzProfile, alpha: float, beta: float,
                  gamma_x: float, gamma_y: float, tau: float, sigma: float):
    """Admissible interval for eta under the four step-size conditions.

    The two momentum conditions cap eta from above; the two margin
    conditions are quadratics P*eta^2 - B*eta + 1 <= 0 whose root interval
    must contain eta.  Returns (lo, hi), possibly empty (lo > hi).
    """
    e_x = 6.0 * profile.c_x * profile.l_xx**2 + 8.0 * profile.c_y * profile.l_yx**2
    e_y = 6.0 * profile.c_x * profile.l_xy**2 + 8.0 * profile.c_y * profile.l_yy**2
    p_x = e_x + 2.0 * profile.c_y * profile.l_yx**2
    b_x = (1.0 - gamma_x) / tau - profile.l_xx - _ratio(profile.l_yx**2, alpha)
    p_y = 10.0 * profile.c_y * profile.l_yy**2
    b_y = (1.0 - gamma_y) / sigma - (alpha + beta) - _ratio(profile.l_yy**2, beta)

    def quad_interval(p: float, b: float) -> tuple[float, float]:
        if p == 0.0:
            return ((1.0 / b, math.inf) if b > 0.0 else (math.inf, -math.inf))
        disc = b * b - 4.0 * p
        if -1e-12 * b * b < disc < 0.0:
            disc = 0.0  # double root lost to rounding
        if b <= 0.0 or disc < 0.0:
            return (math.inf, -math.inf)
        root = math.sqrt(disc)
        return ((b - root) / (2.0 * p), (b + root) / (2.0 * p))

    lo_x, hi_x = quad_interval(p_x, b_x)
    lo_y, hi_y = quad_interval(p_y, b_y)
    cap_x = gamma_x / (tau * e_x) if e_x > 0.0 else math.inf
    cap_y = gamma_y / (sigma * e_y) if e_y > 0.0 else math.inf
    return max(lo_x, lo_y), min(hi_x, hi_y, cap_x, cap_y)


def _step_bounds(profile: LipschitzProfile, alpha: float, beta: float,
                 gamma_x: float, gamma_y: float, eta: float) -> tuple[float, float]:
    """Largest (tau, sigma) satisfying all four conditions at a given eta.

    Rearranged, the margin conditions read B >= P*eta + 1/eta with B linear
    in 1/tau (resp. 1/sigma), and the momentum conditions cap tau (resp.
    sigma) directly, so both maxima are closed-form.
    """
    e_x = 6.0 * profile.c_x * profile.l_xx**2 + 8.0 * profile.c_y * profile.l_yx**2
    e_y = 6.0 * profile.c_x * profile.l_xy**2 + 8.0 * profile.c_y * profile.l_yy**2
    p_x = e_x + 2.0 * profile.c_y * profile.l_yx**2
    p_y = 10.0 * profile.c_y * profile.l_yy**2
    tau = min(
        gamma_x / (eta * e_x) if e_x > 0.0 else math.inf,
        (1.0 - gamma_x) / (p_x * eta + 1.0 / eta + profile.l_xx + _ratio(profile.l_yx**2, alpha)),
    )
    sigma = min(
        gamma_y / (eta * e_y) if e_y > 0.0 else math.inf,
        (1.0 - gamma_y) / (p_y * eta + 1.0 / eta + (alpha + beta) + _ratio(profile.l_yy**2, beta)),
    )
    return tau, sigma


def _certify(profile: LipschitzProfile, alpha: float, beta: float,
             gamma_x: float, gamma_y: float, tau0: float, sigma0: float):
    """Feasible (tau, sigma, eta), keeping the nominal step sizes if possible.

    When the nominal pair admits no eta, the design parameter is chosen to
    maximize the smaller of the two step sizes relative to its nominal value,
    so neither block is starved and the nominal tau/sigma ratio is respected.
    """
    lo, hi = _eta_interval(profile, alpha, beta, gamma_x, gamma_y, tau0, sigma0)
    if lo <= hi:
        eta = math.sqrt(lo * hi) if math.isfinite(hi) else 2.0 * lo
        return tau0, sigma0, eta, 1.0

    def steps_at(eta: float) -> tuple[float, float]:
        tau, sigma = _step_bounds(profile, alpha, beta, gamma_x, gamma_y, eta)
        return min(tau, tau0), min(sigma, sigma0)

    def score(eta: float) -> float:
        tau, sigma = steps_at(eta)
        if tau <= 0.0 or sigma <= 0.0:
            return 0.0
        return min(tau / tau0, sigma / sigma0)

    grid = [10.0 ** (-12.0 + 20.0 * i / 80.0) for i in range(81)]
    best = max(grid, key=score)
    lo_eta, hi_eta = best / 10.0, best * 10.0
    for _ in range(_BISECT_STEPS):
        m1 = lo_eta * (hi_eta / lo_eta) ** (1.0 / 3.0)
        m2 = lo_eta * (hi_eta / lo_eta) ** (2.0 / 3.0)
        if score(m1) >= score(m2):
            hi_eta = m2
        else:
            lo_eta = m1
    eta = math.sqrt(lo_eta * hi_eta)
    if score(eta) <= 0.0:
        raise ScheduleError("eta infeasible; reduce tau/sigma")
    tau, sigma = steps_at(eta)
    scale = math.sqrt((tau / tau0) * (sigma / sigma0))
    return tau, sigma, eta, scale


@dataclass(frozen=True)
class ConstantSchedule:
    """One parameter set reused every epoch; inner length ~ T*n."""

    kind = "constant"
    n: int
    base_t: float
    gbar_x: float
    gbar_y: float
    profile: LipschitzProfile
    tau: float
    sigma: float
    gamma_x: float
    gamma_y: float
    eta: float
    steps: int
    alpha: float
    beta: float
    lx: float
    ly: float
    nominal_tau: float
    nominal_sigma: float
    scale: float

    def epoch(self, k: int) -> EpochParams:
        if k < 1:
            raise ScheduleError("epochs are numbered from 1")
        return EpochParams(self.tau, self.sigma, self.gamma_x, self.gamma_y,
                           self.steps, self.eta)

    def replace(self, **kw) -> "ConstantSchedule":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "n": self.n, "T": self.base_t,
            "gbar_x": self.gbar_x, "gbar_y": self.gbar_y,
            "profile": vars(self.profile).copy(),
        }


class PolynomialSchedule:
    """Per-epoch parameters with T^k = T*(k+1)^2 and momentum decaying as 1/k^2."""

    kind = "polynomial"

    def __init__(self, n: int, base_t: float, gbar_x: float, gbar_y: float,
                 profile: LipschitzProfile):
        self.n = n
        self.base_t = base_t
        self.gbar_x = gbar_x
        self.gbar_y = gbar_y
        self.profile = profile
        self.lx, self.ly = smoothness_aggregates(profile)
        self.alpha = profile.l_yx
        self.beta = profile.l_yy
        self._cache: dict[int, EpochParams] = {}

    def nominal(self, k: int) -> tuple[float, float]:
        gx, gy = self.gbar_x / k**2, self.gbar_y / k**2
        p = self.profile
        tau0 = min(1.0 / (self.lx * k),
                   (1.0 - gx) / (p.l_xx + p.l_yx + 2.0 * self.lx))
        sigma0 = min(1.0 / (self.ly * k),
                     (1.0 - gy) / (p.l_yy + p.l_xy + self.ly))
        return tau0, sigma0

    def epoch(self, k: int) -> EpochParams:
        if k < 1:
            raise ScheduleError("epochs are numbered from 1")
        if k not in self._cache:
            gx, gy = self.gbar_x / k**2, self.gbar_y / k**2
            tau0, sigma0 = self.nominal(k)
            tau, sigma, eta, _ = _certify(self.profile, self.alpha, self.beta,
                                          gx, gy, tau0, sigma0)
            steps = math.ceil(self.base_t * (k + 1) ** 2)
            self._cache[k] = EpochParams(tau, sigma, gx, gy, steps, eta)
        return self._cache[k]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "n": self.n, "T": self.base_t,
            "gbar_x": self.gbar_x, "gbar_y": self.gbar_y,
            "profile": vars(self.profile).copy(),
        }


def constant_schedule(profile: LipschitzProfile, n: int, t: float,
                      gbar_x: float, gbar_y: float) -> ConstantSchedule:
    """Constant parameters; certified against the step-size conditions."""
    _check_args(n, t, gbar_x, gbar_y)
    lx, ly = smoothness_aggregates(profile)
    gx, gy = gbar_x / n, gbar_y / n
    tau0 = min(1.0 / (lx * math.sqrt(n)),
               (1.0 - gx) / (profile.l_xx + profile.l_yx + 2.0 * lx))
    sigma0 = min(1.0 / (ly * math.sqrt(n)),
                 (1.0 - gy) / (profile.l_yy + profile.l_xy + ly))
    alpha, beta = profile.l_yx, profile.l_yy
    tau, sigma, eta, scale = _certify(profile, alpha, beta, gx, gy, tau0, sigma0)
    return ConstantSchedule(
        n=n, base_t=t, gbar_x=gbar_x, gbar_y=gbar_y, profile=profile,
        tau=tau, sigma=sigma, gamma_x=gx, gamma_y=gy, eta=eta,
        steps=math.ceil(t * n), alpha=alpha, beta=beta, lx=lx, ly=ly,
        nominal_tau=tau0, nominal_sigma=sigma0, scale=scale,
    )


def polynomial_schedule(profile: LipschitzProfile, n: int, t: float,
                        gbar_x: float, gbar_y: float) -> PolynomialSchedule:
    """Polynomially growing epochs; certified epoch by epoch."""
    _check_args(n, t, gbar_x, gbar_y)
    return PolynomialSchedule(n, t, gbar_x, gbar_y, profile)


def _check_args(n: int, t: float, gbar_x: float, gbar_y: float) -> None:
    if n < 1:
        raise ScheduleError("n must be at least 1")
    if t <= 0.0:
        raise ScheduleError("inner-loop scale T must be positive")
    for g in (gbar_x, gbar_y):
        if not 0.0 < g < 1.0:
            raise ScheduleError("momentum bases must lie in (0, 1)")


def schedule_from_dict(data: dict):
    profile = LipschitzProfile(**data["profile"])
    maker = constant_schedule if data["kind"] == "constant" else polynomial_schedule
    return maker(profile, int(data["n"]), float(data["T"]),
                 float(data["gbar_x"]), float(data["gbar_y"]))


def validate(schedule, profile: LipschitzProfile, k: int) -> ValidationReport:
    """Check the four step-size conditions at epoch k, reporting slacks."""
    params = schedule.epoch(k)
    alpha, beta = schedule.alpha, schedule.beta
    tau, sigma, gx, gy, eta = params.tau, params.sigma, params.gamma_x, params.gamma_y, params.eta
    e_x = 6.0 * profile.c_x * profile.l_xx**2 + 8.0 * profile.c_y * profile.l_yx**2
    e_y = 6.0 * profile.c_x * profile.l_xy**2 + 8.0 * profile.c_y * profile.l_yy**2
    m_x = (1.0 - gx) / tau - profile.l_xx - e_x * eta - 1.0 / eta
    m_y = (1.0 - gy) / sigma - (alpha + beta) - 8.0 * profile.c_y * profile.l_yy**2 * eta - 1.0 / eta
    notes = []
    if profile.l_yy == 0.0:
        notes.append("beta=0 branch: the dual margin condition drops its L_yy terms")
    ineqs = (
        Inequality("momentum-x", e_x * eta, gx / tau),
        Inequality("momentum-y", e_y * eta, gy / sigma),
        Inequality("margin-x", _ratio(profile.l_yx**2, alpha) + 2.0 * profile.c_y * profile.l_yx**2 * eta, m_x),
        Inequality("margin-y", _ratio(profile.l_yy**2, beta) + 2.0 * profile.c_y * profile.l_yy**2 * eta, m_y),
    )
    return ValidationReport(epoch=k, inequalities=ineqs, notes=tuple(notes))
