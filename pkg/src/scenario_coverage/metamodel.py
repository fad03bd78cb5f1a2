"""Acquisition meta models: coverage behaviour, error rate and costs per method.

Mining and generation are described by the same structure. A mining
method has one coverage model (entry point 0) and is error free once
labelled. A generation method carries a family of coverage models indexed by
the number of mined scenarios it was seeded with, plus a measured error rate
for each of those entry points.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import (
    ContractViolation,
    ExtrapolationError,
    FitError,
    InsufficientSignalError,
    MetamodelFitError,
)
from .fitting import WeibullCoverageModel, fit_weibull
from .geometry import ReferenceVolume, SampleCloud, as_points, coverage_curve

MINING = "mining"
GENERATION = "generation"
# below this many generated points the error-rate estimate is too noisy to trust
MIN_ERROR_SAMPLE = 1000

Generator = Callable[[np.ndarray, int, int], np.ndarray]


@dataclass(frozen=True)
class CostAttributes:
    """One-off setup cost plus per-scenario gaining and validation costs."""

    setup: float = 0.0
    gaining: float = 0.0
    validation: float = 0.0

    def __post_init__(self):
        for name in ("setup", "gaining", "validation"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ContractViolation(f"{name} cost must be finite and >= 0, got {value}")

    def to_dict(self) -> dict:
        return {"setup": self.setup, "gaining": self.gaining, "validation": self.validation}


@dataclass(frozen=True)
class ErrorRateFunction:
    """Measured error rates versus input count, made non-increasing.

    The raw samples are kept verbatim; evaluation uses their antitonic
    (pool-adjacent-violators) regression, interpolated linearly in
    ``log(input_count)`` and held constant beyond the largest count.
    """

    samples: tuple[tuple[int, float], ...]
    _counts: np.ndarray = field(init=False, repr=False, compare=False)
    _fitted: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple((int(k), float(e)) for k, e in self.samples)
        if not samples:
            raise ContractViolation("an error-rate function needs at least one sample")
        counts = np.array([k for k, _ in samples], dtype=float)
        rates = np.array([e for _, e in samples], dtype=float)
        if np.any(np.diff(counts) <= 0):
            raise ContractViolation("error-rate input counts must be strictly increasing")
        if np.any(~np.isfinite(rates)) or np.any((rates < 0) | (rates > 1)):
            raise ContractViolation("error rates must lie in [0, 1]")
        if counts[0] < 0 or (counts.size > 1 and counts[0] <= 0):
            raise ContractViolation("input counts must be positive for log interpolation")
        fitted = isotonic_regression(rates, increasing=False).x
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "_counts", counts)
        object.__setattr__(self, "_fitted", np.clip(fitted, 0.0, 1.0))

    @property
    def regressed(self) -> np.ndarray:
        return self._fitted.copy()

    def __call__(self, input_count: float) -> float:
        k = float(input_count)
        counts, fitted = self._counts, self._fitted
        if k < counts[0]:
            raise ExtrapolationError(f"input count {k} is below the smallest measured count {counts[0]:g}")
        if k >= counts[-1]:
            return float(fitted[-1])
        return float(np.interp(math.log(k), np.log(counts), fitted))

    @classmethod
    def zero(cls) -> "ErrorRateFunction":
        return cls(((0, 0.0),))


def evaluate_error_rate(model: "AcquisitionMetaModel", input_count: float) -> float:
    return model.error_rate(input_count)


@dataclass(frozen=True)
class AcquisitionMetaModel:
    name: str
    kind: str
    costs: CostAttributes
    error_rate: ErrorRateFunction
    coverage_models: tuple[tuple[int, WeibullCoverageModel], ...]
    dims: int | None = None

    def __post_init__(self):
        entries = tuple((int(k), m) for k, m in self.coverage_models)
        object.__setattr__(self, "coverage_models", entries)
        if self.kind not in (MINING, GENERATION):
            raise ContractViolation(f"kind must be {MINING!r} or {GENERATION!r}, got {self.kind!r}")
        if not entries:
            raise ContractViolation(f"meta model {self.name!r} has no coverage models")
        if any(k2 <= k1 for (k1, _), (k2, _) in zip(entries, entries[1:])):
            raise ContractViolation("entry input counts must be strictly increasing")
        if self.kind == MINING:
            if len(entries) != 1 or entries[0][0] != 0:
                raise ContractViolation("a mining model has exactly one coverage model at entry 0")
            if any(e != 0.0 for _, e in self.error_rate.samples):
                raise ContractViolation("mined scenarios are labelled, so their error rate must be 0")

    @property
    def entry_points(self) -> list[int]:
        return [k for k, _ in self.coverage_models]

    def model_at(self, entry: int) -> WeibullCoverageModel:
        for k, m in self.coverage_models:
            if k == entry:
                return m
        raise KeyError(f"no coverage model at entry point {entry}")

    def to_dict(self) -> dict:
        data = {
            "name": self.name,
            "kind": self.kind,
            "costs": self.costs.to_dict(),
            "error_samples": [[k, e] for k, e in self.error_rate.samples],
            "coverage_models": [[k, m.to_dict()] for k, m in self.coverage_models],
        }
        if self.dims is not None:
            data["dims"] = self.dims
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "AcquisitionMetaModel":
        try:
            return cls(
                name=str(data["name"]),
                kind=str(data["kind"]),
                costs=CostAttributes(**{k: float(v) for k, v in data["costs"].items()}),
                error_rate=ErrorRateFunction(tuple((k, e) for k, e in data["error_samples"])),
                coverage_models=tuple((k, WeibullCoverageModel.from_dict(m)) for k, m in data["coverage_models"]),
                dims=data.get("dims"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ContractViolation):
                raise
            raise ContractViolation(f"malformed meta model document: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AcquisitionMetaModel":
        return cls.from_dict(json.loads(text))


def mining_metamodel(name: str, costs: CostAttributes, model: WeibullCoverageModel,
                     dims: int | None = None) -> AcquisitionMetaModel:
    return AcquisitionMetaModel(name, MINING, costs, ErrorRateFunction.zero(), ((0, model),), dims)


def measure_error_rate(generated, ref: ReferenceVolume) -> float:
    """Share of generated points lying outside the reference volume."""
    pts = as_points(generated, ref.space.dims, name="generated points")
    n = pts.shape[0]
    if n == 0:
        raise ContractViolation("cannot measure an error rate on zero points")
    if n < MIN_ERROR_SAMPLE:
        warnings.warn(f"error rate estimated from only {n} points", stacklevel=2)
    outside = n - int(np.count_nonzero(ref.contains_many(pts)))
    return outside / n


def _saturated_model(volumes, v_pre: float, cloud: SampleCloud) -> WeibullCoverageModel:
    """Model for a curve that is flat from the first generated point on.

    Its growth, if any, is reached at once (``b`` large). When the
    generated points add nothing, the limit is set to the volume of one
    cloud sample, the smallest growth the estimator can resolve.
    """
    resolution = cloud.space.volume / len(cloud)
    growth = float(np.max(volumes)) - v_pre if len(volumes) else 0.0
    return WeibullCoverageModel(max(growth, resolution), 50.0, 1.0, v_pre)


def fit_generation_metamodel(input_grid, mined_points, generator: Generator, ref: ReferenceVolume,
                             per_grid_sample: int, *, semi_axes, cloud: SampleCloud,
                             costs: CostAttributes, name: str = GENERATION,
                             seed: int = 0) -> AcquisitionMetaModel:
    """Measure error rate and coverage growth of a generator at several entry points.

    For each ``k`` in ``input_grid`` the generator is seeded with the first
    ``k`` mined points and asked for ``per_grid_sample`` points. Their share
    outside ``ref`` is the error rate at ``k``. The valid ones are added, in
    the order drawn, to a cloud pre-covered by the ``k`` mined points, and a
    Weibull model with ``v_pre`` equal to that initial volume is fitted.
    A generator that adds no coverage beyond its seed data (for example
    one that replays it) gets a model saturating at once just above
    ``v_pre``.

    Raises:
        MetamodelFitError: the generator or a fit failed; ``partial`` holds
            the grid entries completed before the failure.
    """
    grid = [int(k) for k in input_grid]
    mined = as_points(mined_points, cloud.dims, name="mined points")
    if not grid or any(k2 <= k1 for k1, k2 in zip(grid, grid[1:])):
        raise ContractViolation("input grid must be non-empty and strictly increasing")
    if grid[0] < 1 or grid[-1] > mined.shape[0]:
        raise ContractViolation(f"grid values must lie in [1, {mined.shape[0]}] (available mined points)")
    if per_grid_sample < 1:
        raise ContractViolation("per-grid sample size must be positive")

    grid_seeds = np.random.SeedSequence(int(seed)).generate_state(len(grid), dtype=np.uint64)
    partial = []
    for k, grid_seed in zip(grid, grid_seeds):
        try:
            generated = as_points(generator(mined[:k], per_grid_sample, int(grid_seed)), cloud.dims,
                                  name="generated points")
        except Exception as exc:
            raise MetamodelFitError(f"generator failed at entry point {k}: {exc}", partial) from exc
        if generated.shape[0] != per_grid_sample:
            raise MetamodelFitError(
                f"generator returned {generated.shape[0]} points at entry point {k}, "
                f"expected {per_grid_sample}", partial)
        inside = ref.contains_many(generated)
        error = (inside.size - int(np.count_nonzero(inside))) / inside.size
        valid = generated[inside]

        seeded = cloud.copy()
        seeded.reset()
        seeded.cover(mined[:k], semi_axes)
        v_pre = seeded.covered_volume
        counts, volumes = coverage_curve(valid, semi_axes, seeded)
        try:
            model = fit_weibull(counts, volumes, v_pre)
        except InsufficientSignalError:
            model = _saturated_model(volumes, v_pre, seeded)
        except (FitError, ContractViolation, ValueError) as exc:
            raise MetamodelFitError(f"coverage fit failed at entry point {k}: {exc}", partial) from exc
        partial.append((k, error, model))

    return AcquisitionMetaModel(
        name=name,
        kind=GENERATION,
        costs=costs,
        error_rate=ErrorRateFunction(tuple((k, e) for k, e, _ in partial)),
        coverage_models=tuple((k, m) for k, _, m in partial),
        dims=cloud.dims,
    )
