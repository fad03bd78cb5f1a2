"""Weibull saturation models for cumulative coverage curves.

The covered volume after ``x`` concrete scenarios is modelled as

.. math::

    V(x) = a (1 - e^{-b x^c}) + V_{pre}

where ``V_pre`` is the volume already covered before the first scenario is
added. ``V_pre`` is always an input, never a fitted parameter.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    ContractViolation,
    DomainError,
    FitError,
    InsufficientDataError,
    InsufficientSignalError,
    UnreachableTargetError,
)
from .geometry import SampleCloud, as_points, coverage_curve

MIN_FIT_POINTS = 8
DEFAULT_CV_THRESHOLD = 0.05
DEFAULT_REPLICATES = 32

_START_B = np.logspace(-5, 0, 6)
_START_C = (0.5, 1.0, 2.0)
_START_A = (1.0, 1.5)
_MAX_NFEV = 200
_XTOL = 1e-9
_COVERAGE_SLACK = 1e-9
# a fitted limit beyond 1e6 x the largest observed growth, or a shape outside
# [e^-8, e^8], is treated as a diverged start
_MAX_LOG_A = math.log(1e6)
_MAX_LOG_C = 8.0


@dataclass(frozen=True)
class WeibullCoverageModel:
    """Fitted saturation curve ``a * (1 - exp(-b * x**c)) + v_pre``."""

    a: float
    b: float
    c: float
    v_pre: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ContractViolation(f"{name} must be finite and > 0, got {value}")
        if not (math.isfinite(self.v_pre) and self.v_pre >= 0):
            raise ContractViolation(f"v_pre must be finite and >= 0, got {self.v_pre}")

    @property
    def asymptote(self) -> float:
        return self.a + self.v_pre

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        value = self.a * -np.expm1(-self.b * x**self.c) + self.v_pre
        return float(value) if value.ndim == 0 else value

    def line_limited(self, x, kernel_volume: float):
        """Model value capped by the straight line ``v_pre + x * kernel_volume``.

        No set of ``x`` scenarios can cover more than ``x`` single-kernel
        volumes, so this is a sanity bound on predictions.
        """
        return np.minimum(self(x), self.v_pre + np.asarray(x, dtype=float) * kernel_volume)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "v_pre": self.v_pre}

    @classmethod
    def from_dict(cls, data: dict) -> "WeibullCoverageModel":
        return cls(float(data["a"]), float(data["b"]), float(data["c"]), float(data.get("v_pre", 0.0)))


# Parameters are solved in log space, theta = (ln a, ln b, ln c), which keeps
# all three strictly positive while letting MINPACK's unconstrained
# Levenberg-Marquardt do the work.
def _residuals(theta, log_x, y):
    log_a, log_b, log_c = theta
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.exp(log_b + np.exp(log_c) * log_x)
        return np.exp(log_a) * -np.expm1(-u) - y


def _jacobian(theta, log_x, y):
    log_a, log_b, log_c = theta
    with np.errstate(over="ignore", invalid="ignore"):
        u = np.exp(log_b + np.exp(log_c) * log_x)
        jac = np.empty((log_x.size, 3))
        jac[:, 0] = np.exp(log_a) * -np.expm1(-u)
        jac[:, 1] = np.exp(log_a) * np.exp(-u) * u
        jac[:, 2] = jac[:, 1] * log_x * np.exp(log_c)
    return jac


def _validate_curve(counts, volumes, v_pre: float, strict: bool):
    x = np.asarray(counts, dtype=float).reshape(-1)
    v = np.asarray(volumes, dtype=float).reshape(-1)
    if x.size != v.size:
        raise ContractViolation(f"{x.size} counts but {v.size} volumes")
    if x.size < MIN_FIT_POINTS:
        raise InsufficientDataError(f"need at least {MIN_FIT_POINTS} curve points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise ContractViolation("curve contains non-finite values")
    if x[0] <= 0 or np.any(np.diff(x) <= 0):
        raise ContractViolation("counts must be positive and strictly increasing")
    if strict:
        if np.any(np.diff(v) < 0):
            raise ContractViolation("coverage volumes must be non-decreasing")
        if v.min() < v_pre - _COVERAGE_SLACK * max(1.0, abs(v_pre)):
            raise ContractViolation(f"volumes fall below v_pre={v_pre}")
    return x, v


def _fit(counts, volumes, v_pre: float = 0.0, strict: bool = True):
    x, v = _validate_curve(counts, volumes, v_pre, strict)
    y = v - v_pre
    if np.ptp(v) == 0 or y.max() <= 0:
        raise InsufficientSignalError("coverage curve shows no growth; saturation limit is not identifiable")

    # work on unit-scaled data; b transforms as b' = b * x_scale**c
    x_scale, y_scale = x.max(), y.max()
    log_x, ys = np.log(x / x_scale), y / y_scale
    best = None
    for a0 in _START_A:
        for c0 in _START_C:
            for b0 in _START_B:
                theta0 = np.log([a0, b0 * x_scale**c0, c0])
                res = least_squares(
                    _residuals, theta0, jac=_jacobian, args=(log_x, ys), method="lm",
                    xtol=_XTOL, ftol=1e-15, gtol=1e-15, max_nfev=_MAX_NFEV,
                )
                if not (np.all(np.isfinite(res.x)) and np.isfinite(res.cost)):
                    continue
                if res.x[0] > _MAX_LOG_A or abs(res.x[2]) > _MAX_LOG_C:
                    continue
                if best is None or res.cost < best.cost:
                    best = res
    if best is None:
        raise FitError("no start converged to a finite solution")
    log_a, log_b, log_c = best.x
    a = math.exp(log_a) * y_scale
    c = math.exp(log_c)
    b = math.exp(log_b - c * math.log(x_scale))
    if not (a > 1e-12 * y_scale and 0 < b < math.inf):
        raise InsufficientSignalError(f"fit collapsed to a degenerate curve (a={a}, b={b})")
    model = WeibullCoverageModel(float(a), float(b), float(c), float(v_pre))
    rss = float(np.sum((model(x) - v) ** 2))
    return model, rss


def fit_weibull(counts, volumes, v_pre: float = 0.0, *, strict: bool = True) -> WeibullCoverageModel:
    """Least-squares fit of ``(a, b, c)`` to a coverage curve with ``v_pre`` fixed.

    A grid of starts over ``a``, ``b`` and ``c`` is refined with
    Levenberg-Marquardt on log-parameters (so all three stay positive) and
    the lowest residual fit wins.

    Args:
        counts: strictly increasing positive input counts (at least 8).
        volumes: covered volume at each count, including ``v_pre``.
        v_pre: volume covered before the first input.
        strict: reject non-monotone curves. Coverage curves are monotone by
            construction; pass False to fit noisy measurements.

    Raises:
        InsufficientDataError: fewer than 8 points.
        InsufficientSignalError: the curve never grows.
        ContractViolation: malformed or (in strict mode) non-monotone input.
    """
    return _fit(counts, volumes, v_pre, strict)[0]


def residual_sum_of_squares(model: WeibullCoverageModel, counts, volumes) -> float:
    return float(np.sum((model(np.asarray(counts, dtype=float)) - np.asarray(volumes, dtype=float)) ** 2))


@dataclass(frozen=True)
class FitDiagnostics:
    """Aggregate of bootstrap Weibull fits over randomised input orders.

    ``model`` is fitted to the replicate-mean curve (``counts``,
    ``mean_volumes``) and ``rss`` is its residual sum of squares.
    ``replicate_params`` holds ``(a, b, c)`` of each successful replicate,
    ordered by replicate index.
    """

    replicates: int
    failures: int
    param_mean: tuple[float, float, float]
    param_cv: tuple[float, float, float]
    rss: float
    converged: bool
    cv_threshold: float
    model: WeibullCoverageModel
    counts: np.ndarray = field(repr=False, compare=False)
    mean_volumes: np.ndarray = field(repr=False, compare=False)
    replicate_params: np.ndarray = field(repr=False, compare=False)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "failures": self.failures,
            "param_mean": dict(zip("abc", self.param_mean)),
            "param_cv": dict(zip("abc", self.param_cv)),
            "rss": self.rss,
            "converged": self.converged,
            "cv_threshold": self.cv_threshold,
            "note": self.note,
        }


def bootstrap_fit(points, semi_axes, cloud: SampleCloud, replicates: int = DEFAULT_REPLICATES,
                  seed: int = 0, *, cv_threshold: float = DEFAULT_CV_THRESHOLD,
                  workers: int = 1) -> FitDiagnostics:
    """Fit the saturation model over ``replicates`` random orderings of ``points``.

    Each replicate permutes the points, builds the coverage curve on
    ``cloud`` (starting from its current flags, whose volume is ``v_pre``)
    and fits a Weibull model. Failed replicates are counted; more than half
    failing raises :class:`FitError`.

    Results depend only on ``seed``, not on ``workers``.
    """
    if replicates < 2:
        raise ContractViolation(f"need at least 2 replicates, got {replicates}")
    pts = as_points(points, cloud.dims)
    n = pts.shape[0]
    if n == 0:
        raise ContractViolation("bootstrap needs at least one point")
    rng = np.random.Generator(np.random.Philox(seed))
    perms = [rng.permutation(n) for _ in range(replicates)]
    v_pre = cloud.covered_volume

    def run(i):
        counts, volumes = coverage_curve(pts[perms[i]], semi_axes, cloud)
        try:
            model = fit_weibull(counts, volumes, v_pre)
        except FitError:
            model = None
        return volumes, model

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(replicates)))
    else:
        results = [run(i) for i in range(replicates)]

    fitted = [m for _, m in results if m is not None]
    failures = replicates - len(fitted)
    if failures > replicates / 2:
        raise FitError(f"{failures} of {replicates} bootstrap fits failed")
    params = np.array([[m.a, m.b, m.c] for m in fitted])
    mean = params.mean(axis=0)
    std = params.std(axis=0, ddof=1) if len(fitted) > 1 else np.zeros(3)
    cv = std / np.abs(mean)

    counts = np.arange(1, n + 1)
    mean_volumes = np.mean([v for v, _ in results], axis=0)
    model, rss = _fit(counts, mean_volumes, v_pre)
    converged = bool(cv[0] <= cv_threshold)
    note = "" if converged else (
        "saturation limit did not converge; the data may mix populations "
        "(e.g. valid and invalid scenarios) with different growth rates"
    )
    return FitDiagnostics(
        replicates=replicates,
        failures=failures,
        param_mean=tuple(float(v) for v in mean),
        param_cv=tuple(float(v) for v in cv),
        rss=rss,
        converged=converged,
        cv_threshold=cv_threshold,
        model=model,
        counts=counts,
        mean_volumes=mean_volumes,
        replicate_params=params,
        note=note,
    )


def coverage_coefficient(model: WeibullCoverageModel, volume: float) -> float:
    """Covered volume as a fraction of the model's asymptote ``a + v_pre``."""
    top = model.asymptote
    slack = _COVERAGE_SLACK * max(1.0, top)
    if volume < model.v_pre - slack or volume > top + slack:
        raise DomainError(f"volume {volume} outside [{model.v_pre}, {top}]")
    return min(1.0, max(0.0, volume / top))


def required_count_for_volume(model: WeibullCoverageModel, target_volume: float,
                              kernel_volume: float | None = None) -> int:
    """Smallest integer ``x`` with ``model(x) >= target_volume``.

    With ``kernel_volume`` the straight-line bound is applied as well, so
    the count is never below ``(target - v_pre) / kernel_volume``.
    """
    if target_volume <= model.v_pre:
        return 0
    if target_volume >= model.asymptote:
        raise UnreachableTargetError(
            f"target volume {target_volume} is not below the asymptote {model.asymptote}"
        )
    frac = (target_volume - model.v_pre) / model.a
    x = (-math.log1p(-frac) / model.b) ** (1.0 / model.c)
    n = math.ceil(x)
    if x <= 1e15:
        # the closed form can land one step off after rounding
        for _ in range(64):
            if n > 0 and model(n - 1) >= target_volume:
                n -= 1
            elif model(n) < target_volume:
                n += 1
            else:
                break
    if kernel_volume is not None and kernel_volume > 0:
        n = max(n, math.ceil((target_volume - model.v_pre) / kernel_volume))
    return int(n)


def required_count(model: WeibullCoverageModel, target_c: float) -> int:
    """Inputs needed to reach coverage coefficient ``target_c`` (< 1)."""
    if target_c >= 1.0:
        raise UnreachableTargetError(f"coverage {target_c} is never attained (asymptote is 1)")
    return required_count_for_volume(model, target_c * model.asymptote)
