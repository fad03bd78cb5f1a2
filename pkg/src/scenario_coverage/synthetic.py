"""Seeded synthetic scenario sources with known ground truth.

All streams use numpy's ``Philox`` counter-based bit generator, so a source
is reproducible from ``(kind, params, seed)`` on any platform. Repeated
:meth:`SyntheticSource.draw` calls continue the same stream.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractViolation
from .geometry import ParameterSpace, _as_semi_axes, as_points

KINDS = ("uniform_box", "gaussian_mixture", "degradable_generator")


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def leak_rate(leak: float, seed_size: int) -> float:
    """Probability that the degradable generator emits a uniform (off-data) sample."""
    return min(1.0, leak / math.sqrt(seed_size))


class SyntheticSource:
    """Stateful, deterministic stream of parameter points.

    Use the :meth:`uniform_box`, :meth:`gaussian_mixture` constructors or
    :func:`degradable_generator` rather than building ``params`` by hand.
    """

    def __init__(self, kind: str, params: dict, seed: int = 0):
        if kind not in KINDS:
            raise ContractViolation(f"unknown source kind {kind!r}; expected one of {KINDS}")
        self.kind = kind
        self.params = params
        self.seed = int(seed)
        self._validate()
        self._rng = philox(self.seed)

    def _validate(self):
        p = self.params
        if self.kind == "uniform_box":
            if not isinstance(p.get("space"), ParameterSpace):
                raise ContractViolation("uniform_box needs a ParameterSpace under 'space'")
        elif self.kind == "gaussian_mixture":
            means = as_points(p["means"], name="means")
            k, m = means.shape
            if k == 0:
                raise ContractViolation("a mixture needs at least one component")
            stds = np.asarray(p["stds"], dtype=float)
            if stds.ndim == 1 and stds.size == k:
                stds = stds[:, None]  # one isotropic spread per component
            try:
                stds = np.broadcast_to(stds, (k, m)).copy()
            except ValueError:
                raise ContractViolation(f"stds must be a scalar, {k} values or a ({k}, {m}) array") from None
            if np.any(~np.isfinite(stds)) or np.any(stds <= 0):
                raise ContractViolation("mixture standard deviations must be > 0")
            weights = np.asarray(p.get("weights", np.ones(k)), dtype=float).reshape(-1)
            if weights.size != k or np.any(weights < 0) or weights.sum() <= 0:
                raise ContractViolation("mixture weights must be k non-negative numbers with positive sum")
            self.params = {"means": means, "stds": stds, "weights": weights / weights.sum()}
        else:
            space = p.get("space")
            if not isinstance(space, ParameterSpace):
                raise ContractViolation("degradable_generator needs a ParameterSpace under 'space'")
            seed_data = as_points(p["seed_data"], space.dims, name="seed data")
            if seed_data.shape[0] == 0:
                raise ContractViolation("degradable_generator needs non-empty seed data")
            leak = float(p["leak"])
            if not 0.0 <= leak <= 1.0:
                raise ContractViolation(f"leak must lie in [0, 1], got {leak}")
            self.params = {
                "space": space,
                "seed_data": seed_data,
                "leak": leak,
                "semi_axes": _as_semi_axes(p["semi_axes"], space.dims),
            }

    @property
    def dims(self) -> int:
        if self.kind == "gaussian_mixture":
            return self.params["means"].shape[1]
        return self.params["space"].dims

    @property
    def leak_rate(self) -> float:
        if self.kind != "degradable_generator":
            return 0.0
        return leak_rate(self.params["leak"], self.params["seed_data"].shape[0])

    def draw(self, count: int) -> np.ndarray:
        if count < 0:
            raise ContractViolation(f"count must be >= 0, got {count}")
        count = int(count)
        rng, p = self._rng, self.params
        if count == 0:
            return np.empty((0, self.dims))
        if self.kind == "uniform_box":
            space = p["space"]
            return space.lower + rng.random((count, space.dims)) * space.widths
        if self.kind == "gaussian_mixture":
            comp = rng.choice(p["weights"].size, size=count, p=p["weights"])
            noise = rng.standard_normal((count, p["means"].shape[1]))
            return p["means"][comp] + p["stds"][comp] * noise
        return self._draw_degradable(count)

    def _draw_degradable(self, count: int) -> np.ndarray:
        rng, p = self._rng, self.params
        space, seed_data, axes = p["space"], p["seed_data"], p["semi_axes"]
        m = space.dims
        leaked = rng.random(count) < self.leak_rate
        uniform = space.lower + rng.random((count, m)) * space.widths

        # uniform point inside the kernel of a random seed point
        anchor = seed_data[rng.integers(0, seed_data.shape[0], count)]
        direction = rng.standard_normal((count, m))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.random(count) ** (1.0 / m)
        near = anchor + direction * radius[:, None] * axes
        # moving coordinates toward an in-box center never leaves the ellipsoid
        near = np.clip(near, space.lower, space.upper)
        return np.where(leaked[:, None], uniform, near)

    @classmethod
    def uniform_box(cls, space: ParameterSpace, seed: int = 0) -> "SyntheticSource":
        return cls("uniform_box", {"space": space}, seed)

    @classmethod
    def gaussian_mixture(cls, means, stds, weights=None, seed: int = 0) -> "SyntheticSource":
        """Mixture of axis-aligned normals.

        ``stds`` is a scalar, one value per component, or a ``(k, m)`` array.
        Samples are not clipped to any parameter space.
        """
        params = {"means": means, "stds": stds}
        if weights is not None:
            params["weights"] = weights
        return cls("gaussian_mixture", params, seed)


def draw(source: SyntheticSource, count: int) -> np.ndarray:
    return source.draw(count)


def degradable_generator(seed_data, leak: float, space: ParameterSpace, semi_axes,
                         seed: int = 0) -> SyntheticSource:
    """Test double for a data-driven generator whose error shrinks with more data.

    With probability ``1 - leak / sqrt(len(seed_data))`` a sample is drawn
    uniformly from the kernel (``semi_axes``) of a random seed point; otherwise
    it is uniform over the whole ``space``. The expected share of samples
    outside a reference volume that contains every seed kernel is therefore
    ``leak_rate * P(uniform point lies outside the reference)``.
    """
    return SyntheticSource(
        "degradable_generator",
        {"seed_data": seed_data, "leak": leak, "space": space, "semi_axes": semi_axes},
        seed,
    )


class DegradableGenerator:
    """Generator callable for meta-model fitting, backed by :func:`degradable_generator`."""

    def __init__(self, space: ParameterSpace, semi_axes, leak: float):
        self.space = space
        self.semi_axes = semi_axes
        self.leak = leak

    def __call__(self, seed_data, count: int, seed: int) -> np.ndarray:
        return degradable_generator(seed_data, self.leak, self.space, self.semi_axes, seed).draw(count)


class ReplayGenerator:
    """Generator callable that re-emits seed points verbatim (sampled with replacement)."""

    def __call__(self, seed_data, count: int, seed: int) -> np.ndarray:
        data = as_points(seed_data)
        if data.shape[0] == 0:
            raise ContractViolation("cannot replay an empty dataset")
        return data[philox(seed).integers(0, data.shape[0], int(count))]
