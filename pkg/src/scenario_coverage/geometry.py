"""Ellipsoidal coverage bodies and Monte Carlo estimates of their union volume.

A concrete scenario is a point in an ``m``-dimensional box of scenario
parameters. Around each point sits an axis-aligned ellipsoid; a location
``x`` is covered by the kernel centred at ``c`` with semi-axes ``p`` iff

.. math::

    \\sum_j ((x_j - c_j) / p_j)^2 \\le 1

Union volumes are estimated by hit-or-miss sampling over a fixed, seeded
cloud of uniform points (:class:`SampleCloud`). Boundary points count as
covered.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation

DEFAULT_SAMPLES = 2**20
DEFAULT_DILATION = 1.5

# average number of cloud samples per index cell
_CLOUD_CELL_OCCUPANCY = 32
# upper bound on (query, candidate kernel) pairs tested at once
_PAIR_BUDGET = 1 << 21
# size limit and maximum refinement of the reference-volume cell index
_GRID_PAIR_BUDGET = 1 << 23
_GRID_MAX_REFINE = 8


def as_points(points, dims: int | None = None, name: str = "points") -> np.ndarray:
    """Coerce ``points`` to a float array of shape ``(n, m)``.

    A 1-D input is read as a single point. Raises ContractViolation on a
    dimension mismatch or non-finite coordinates.
    """
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.empty((0, dims if dims is not None else 0))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ContractViolation(f"{name} must be a 2-D array, got shape {arr.shape}")
    if dims is not None and arr.shape[1] != dims:
        raise ContractViolation(
            f"{name} have {arr.shape[1]} dimensions, expected {dims}"
        )
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contain non-finite coordinates")
    return arr


def _as_semi_axes(semi_axes, dims: int) -> np.ndarray:
    p = np.asarray(semi_axes, dtype=float).reshape(-1)
    if p.size == 1 and dims > 1:
        p = np.full(dims, float(p[0]))
    if p.size != dims:
        raise ContractViolation(f"semi_axes have {p.size} entries, expected {dims}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ContractViolation(f"semi_axes must be finite and > 0, got {p.tolist()}")
    return p


def _inside(points: np.ndarray, center: np.ndarray, semi_axes: np.ndarray) -> np.ndarray:
    d = (points - center) / semi_axes
    return np.einsum("ij,ij->i", d, d) <= 1.0


def ellipsoid_volume(semi_axes) -> float:
    """Analytic volume of an ``m``-dimensional ellipsoid."""
    p = np.asarray(semi_axes, dtype=float).reshape(-1)
    m = p.size
    return float(math.pi ** (m / 2) / math.gamma(m / 2 + 1) * np.prod(p))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParameterSpace:
    """Axis-aligned box bounding a logical scenario's parameters."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.size < 1 or lower.shape != upper.shape:
            raise ContractViolation(
                f"lower/upper must be non-empty and equally long, got {lower.size}/{upper.size}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ContractViolation("space bounds must be finite")
        if np.any(lower >= upper):
            raise ContractViolation("every lower bound must be strictly below its upper bound")
        names = tuple(self.names) or tuple(f"x{j}" for j in range(lower.size))
        if len(names) != lower.size:
            raise ContractViolation(f"{len(names)} names given for {lower.size} dimensions")
        object.__setattr__(self, "lower", _readonly(lower))
        object.__setattr__(self, "upper", _readonly(upper))
        object.__setattr__(self, "names", names)

    @property
    def dims(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points) -> np.ndarray:
        pts = as_points(points, self.dims)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class CoverageKernel:
    """Axis-aligned ellipsoid around one concrete scenario."""

    center: np.ndarray
    semi_axes: np.ndarray

    def __post_init__(self):
        center = as_points(self.center, name="center")
        if center.shape[0] != 1:
            raise ContractViolation("a kernel has exactly one center")
        object.__setattr__(self, "center", _readonly(center[0]))
        object.__setattr__(self, "semi_axes", _readonly(_as_semi_axes(self.semi_axes, center.shape[1])))

    @property
    def dims(self) -> int:
        return self.center.size

    @property
    def volume(self) -> float:
        return ellipsoid_volume(self.semi_axes)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.semi_axes, self.center + self.semi_axes

    def contains(self, points) -> np.ndarray:
        return _inside(as_points(points, self.dims), self.center, self.semi_axes)


def kernels_for(points, semi_axes) -> list[CoverageKernel]:
    """One kernel per point, all sharing ``semi_axes``."""
    pts = as_points(points)
    return [CoverageKernel(row, semi_axes) for row in pts]


class VolumeEstimate(NamedTuple):
    volume: float
    stderr: float
    covered: int
    samples: int


def _expand_ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenate ``arange(s, e)`` for each pair without a Python loop."""
    lens = ends - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    shift = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    return np.arange(total, dtype=np.int64) + shift


class SampleCloud:
    """Seeded uniform samples over a :class:`ParameterSpace` with coverage flags.

    Points are drawn with numpy's Philox counter-based generator, so the
    cloud is fully determined by ``(space, samples, seed)``. They are stored
    sorted by cell of a uniform grid so that the samples inside a kernel's
    bounding box can be gathered as a few contiguous slices.

    ``covered`` holds per-sample flags that only :meth:`cover` mutates, and
    only from False to True.
    """

    def __init__(self, space: ParameterSpace, samples: int = DEFAULT_SAMPLES, seed: int = 0):
        if samples < 1:
            raise ContractViolation(f"a sample cloud needs at least one point, got {samples}")
        self.space = space
        self.seed = int(seed)
        m = space.dims
        rng = np.random.Generator(np.random.Philox(self.seed))
        unit = rng.random((int(samples), m))

        r = max(1, int(math.floor((samples / _CLOUD_CELL_OCCUPANCY) ** (1.0 / m))))
        cells = np.minimum((unit * r).astype(np.int64), r - 1)
        keys = np.ravel_multi_index(cells.T, (r,) * m) if m > 1 else cells[:, 0]
        order = np.argsort(keys, kind="stable")
        counts = np.bincount(keys, minlength=r**m)

        self.points = space.lower + unit[order] * space.widths
        self.points.setflags(write=False)
        self.covered = np.zeros(int(samples), dtype=bool)
        self._res = r
        self._cell = space.widths / r
        self._offsets = np.concatenate(([0], np.cumsum(counts)))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.space.dims

    def copy(self) -> "SampleCloud":
        """Shallow copy sharing the (read-only) points, with its own flags."""
        new = object.__new__(SampleCloud)
        new.__dict__.update(self.__dict__)
        new.covered = self.covered.copy()
        return new

    def reset(self) -> None:
        self.covered[:] = False

    def estimate(self, count: int) -> VolumeEstimate:
        n = len(self)
        frac = count / n
        vol = self.space.volume
        return VolumeEstimate(vol * frac, vol * math.sqrt(frac * (1.0 - frac) / n), int(count), n)

    @property
    def covered_volume(self) -> float:
        return self.estimate(int(self.covered.sum())).volume

    def _candidates(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        r = self._res
        clo = np.floor((lo - self.space.lower) / self._cell).astype(np.int64)
        chi = np.floor((hi - self.space.lower) / self._cell).astype(np.int64)
        if np.any(chi < 0) or np.any(clo > r - 1):
            return np.empty(0, dtype=np.int64)
        clo = np.clip(clo, 0, r - 1)
        chi = np.clip(chi, 0, r - 1)
        prefix = np.zeros(1, dtype=np.int64)
        for j in range(self.dims - 1):
            prefix = (prefix[:, None] * r + np.arange(clo[j], chi[j] + 1)[None, :]).reshape(-1)
        starts = self._offsets[prefix * r + clo[-1]]
        ends = self._offsets[prefix * r + chi[-1] + 1]
        return _expand_ranges(starts, ends)

    def _slice_table(self, centers: np.ndarray, semi_axes: np.ndarray):
        """Candidate sample slices for many same-shaped kernels at once.

        Returns ``(ptr, starts, ends)``: the slices of kernel ``i`` are
        ``starts[ptr[i]:ptr[i + 1]]`` / ``ends[...]``.
        """
        r, m = self._res, self.dims
        clo = np.floor((centers - semi_axes - self.space.lower) / self._cell).astype(np.int64)
        chi = np.floor((centers + semi_axes - self.space.lower) / self._cell).astype(np.int64)
        valid = np.all((chi >= 0) & (clo <= r - 1), axis=1)
        clo = np.clip(clo, 0, r - 1)
        chi = np.clip(chi, 0, r - 1)
        owners, starts, ends = [], [], []
        span = (chi - clo)[valid, : m - 1].max(axis=0) if valid.any() else np.zeros(m - 1, dtype=np.int64)
        for offset in itertools.product(*(range(int(d) + 1) for d in span)):
            cell = clo[:, : m - 1] + np.asarray(offset, dtype=np.int64)
            ok = valid & np.all(cell <= chi[:, : m - 1], axis=1)
            k = np.nonzero(ok)[0]
            prefix = np.zeros(k.size, dtype=np.int64)
            for j in range(m - 1):
                prefix = prefix * r + cell[k, j]
            owners.append(k)
            starts.append(self._offsets[prefix * r + clo[k, -1]])
            ends.append(self._offsets[prefix * r + chi[k, -1] + 1])
        owners = np.concatenate(owners)
        order = np.argsort(owners, kind="stable")
        ptr = np.searchsorted(owners[order], np.arange(centers.shape[0] + 1))
        return ptr, np.concatenate(starts)[order], np.concatenate(ends)[order]

    def _test_new(self, mask: np.ndarray, idx: np.ndarray, center: np.ndarray, semi_axes: np.ndarray) -> int:
        idx = idx[~mask[idx]]
        new = idx[_inside(self.points[idx], center, semi_axes)]
        mask[new] = True
        return new.size

    def _cover_into(self, mask: np.ndarray, center: np.ndarray, semi_axes: np.ndarray) -> int:
        idx = self._candidates(center - semi_axes, center + semi_axes)
        return self._test_new(mask, idx, center, semi_axes)

    def _cover_sequence(self, mask: np.ndarray, centers: np.ndarray, semi_axes: np.ndarray) -> np.ndarray:
        """Cover kernels in order; return the newly covered count for each."""
        ptr, starts, ends = self._slice_table(centers, semi_axes)
        gained = np.zeros(centers.shape[0], dtype=np.int64)
        for i in range(centers.shape[0]):
            idx = _expand_ranges(starts[ptr[i]:ptr[i + 1]], ends[ptr[i]:ptr[i + 1]])
            gained[i] = self._test_new(mask, idx, centers[i], semi_axes)
        return gained

    def cover(self, points, semi_axes) -> int:
        """Mark samples inside any kernel around ``points``; return the count newly set."""
        pts = as_points(points, self.dims)
        p = _as_semi_axes(semi_axes, self.dims)
        if pts.shape[0] == 0:
            return 0
        return int(self._cover_sequence(self.covered, pts, p).sum())


def _check_cloud(cloud: SampleCloud, dims: int) -> None:
    if cloud.dims != dims:
        raise ContractViolation(f"cloud has {cloud.dims} dimensions, kernels have {dims}")


def union_volume(kernels: Sequence[CoverageKernel], cloud: SampleCloud) -> VolumeEstimate:
    """Estimate the volume of the union of ``kernels`` inside ``cloud.space``.

    Only the kernels count; the cloud's own ``covered`` flags are neither
    read nor modified. An empty kernel list yields exactly zero.
    """
    if len(kernels) == 0:
        return VolumeEstimate(0.0, 0.0, 0, len(cloud))
    for k in kernels:
        _check_cloud(cloud, k.dims)
    mask = np.zeros(len(cloud), dtype=bool)
    count = 0
    for k in kernels:
        count += cloud._cover_into(mask, k.center, k.semi_axes)
    return cloud.estimate(count)


def coverage_curve(points, semi_axes, cloud: SampleCloud) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative union volume after each point is added, in the given order.

    The curve starts from the cloud's current ``covered`` flags (so a cloud
    pre-covered with existing data yields curves offset by that volume);
    the cloud itself is left untouched.

    Returns:
        ``(counts, volumes)`` where ``counts`` is ``1..n``.
    """
    pts = as_points(points, cloud.dims)
    p = _as_semi_axes(semi_axes, cloud.dims)
    n = pts.shape[0]
    counts = np.arange(1, n + 1, dtype=np.int64)
    if n == 0:
        return counts, np.empty(0)
    mask = cloud.covered.copy()
    running = int(mask.sum()) + np.cumsum(cloud._cover_sequence(mask, pts, p))
    volumes = np.array([cloud.estimate(int(k)).volume for k in running])
    return counts, volumes


class _KernelGrid:
    """Uniform grid whose cells list every kernel whose bounding box overlaps them.

    Cells are refined below the bounding-box width while the index, times
    the ``2**m`` corners tested per entry, stays within ``_GRID_PAIR_BUDGET``. A cell whose corners all lie in a
    single kernel is inside that (convex) kernel entirely; such cells are
    flagged ``full`` so queries landing there need no pair tests.
    """

    def __init__(self, centers: np.ndarray, half_widths: np.ndarray, lower: np.ndarray, upper: np.ndarray):
        m = centers.shape[1]
        refine = 1
        while refine < _GRID_MAX_REFINE and centers.shape[0] * (4 * refine + 4) ** m <= _GRID_PAIR_BUDGET:
            refine *= 2
        width = 2.0 * half_widths * (1.0 + 1e-9) / refine
        shape = np.maximum(1, np.ceil((upper - lower) / width)).astype(np.int64)
        while math.prod(int(s) for s in shape) > 2**62:
            width = width * 2.0
            shape = np.maximum(1, np.ceil((upper - lower) / width)).astype(np.int64)
        self.lower = lower
        self.width = width
        self.shape = tuple(int(s) for s in shape)

        lo = np.floor((centers - half_widths - lower) / width).astype(np.int64)
        hi = np.floor((centers + half_widths - lower) / width).astype(np.int64)
        # bounding boxes entirely outside the space can never hold an in-space point
        keep = np.all((hi >= 0) & (lo <= shape - 1), axis=1)
        ids = np.nonzero(keep)[0]
        lo = np.clip(lo[keep], 0, shape - 1)
        hi = np.clip(hi[keep], 0, shape - 1)

        keys, owners, full = [], [], []
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=m)))
        span = (hi - lo).max(axis=0) if ids.size else np.zeros(m, dtype=np.int64)
        for offset in itertools.product(*(range(int(d) + 1) for d in span)):
            cell = lo + np.asarray(offset, dtype=np.int64)
            ok = np.all(cell <= hi, axis=1)
            cell, owner = cell[ok], ids[ok]
            keys.append(self._key(cell))
            owners.append(owner)
            inside = np.ones(owner.size, dtype=bool)
            for corner in corners:
                d = (lower + (cell + corner) * width - centers[owner]) / half_widths
                inside &= np.einsum("ij,ij->i", d, d) <= 1.0
            full.append(inside)
        keys = np.concatenate(keys) if keys else np.empty(0, dtype=np.int64)
        owners = np.concatenate(owners) if owners else np.empty(0, dtype=np.int64)
        full = np.concatenate(full) if full else np.empty(0, dtype=bool)
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.owners = owners[order]
        self.full_keys = np.unique(keys[full])

    def _key(self, cells: np.ndarray) -> np.ndarray:
        if cells.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.ravel_multi_index(cells.T, self.shape).astype(np.int64)

    def lookup(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per point: whether its cell is full, and slice bounds into ``owners``."""
        cells = np.floor((points - self.lower) / self.width).astype(np.int64)
        cells = np.clip(cells, 0, np.asarray(self.shape) - 1)
        keys = self._key(cells)
        full = np.isin(keys, self.full_keys, assume_unique=False)
        return full, np.searchsorted(self.keys, keys, side="left"), np.searchsorted(self.keys, keys, side="right")


@dataclass(frozen=True, eq=False)
class ReferenceVolume:
    """Dilated union of trusted kernels, clipped to the parameter space.

    A point is inside iff it lies in ``space`` and inside at least one kernel
    whose semi-axes are scaled by ``dilation``.
    """

    centers: np.ndarray
    semi_axes: np.ndarray
    dilation: float
    space: ParameterSpace
    _grid: _KernelGrid = field(init=False, repr=False)

    def __post_init__(self):
        m = self.space.dims
        centers = as_points(self.centers, m, name="valid points")
        if centers.shape[0] == 0:
            raise ContractViolation("a reference volume needs at least one valid point")
        if not (self.dilation >= 1.0 and math.isfinite(self.dilation)):
            raise ContractViolation(f"dilation must be >= 1, got {self.dilation}")
        p = _as_semi_axes(self.semi_axes, m)
        object.__setattr__(self, "centers", _readonly(centers))
        object.__setattr__(self, "semi_axes", _readonly(p))
        object.__setattr__(self, "dilation", float(self.dilation))
        object.__setattr__(
            self, "_grid", _KernelGrid(centers, self.scaled_axes, self.space.lower, self.space.upper)
        )

    @property
    def scaled_axes(self) -> np.ndarray:
        return self.semi_axes * self.dilation

    def contains_many(self, points) -> np.ndarray:
        """Vectorised membership test for an ``(n, m)`` array of points."""
        pts = as_points(points, self.space.dims)
        result = np.zeros(pts.shape[0], dtype=bool)
        in_space = np.nonzero(self.space.contains(pts))[0] if pts.shape[0] else np.empty(0, dtype=np.int64)
        if in_space.size == 0:
            return result
        axes = self.scaled_axes
        full, starts, ends = self._grid.lookup(pts[in_space])
        result[in_space[full]] = True
        in_space = in_space[~full]
        pts = pts[in_space]
        starts, ends = starts[~full], ends[~full]
        pairs = np.cumsum(ends - starts)
        lo = 0
        while lo < pts.shape[0]:
            base = pairs[lo - 1] if lo else 0
            hi = max(lo + 1, int(np.searchsorted(pairs, base + _PAIR_BUDGET, side="right")))
            q = np.repeat(np.arange(lo, hi), ends[lo:hi] - starts[lo:hi])
            k = self._grid.owners[_expand_ranges(starts[lo:hi], ends[lo:hi])]
            d = (pts[q] - self.centers[k]) / axes
            hit = np.einsum("ij,ij->i", d, d) <= 1.0
            result[in_space[q[hit]]] = True
            lo = hi
        return result

    def contains(self, point) -> bool:
        return bool(self.contains_many(as_points(point, self.space.dims))[0])


def build_reference_volume(valid_points, semi_axes, dilation: float = DEFAULT_DILATION,
                           space: ParameterSpace | None = None) -> ReferenceVolume:
    """Thicken the coverage of a trusted valid set into a reference volume.

    Every semi-axis is scaled by ``dilation`` (which must be >= 1) and the
    result is clipped to ``space``.
    """
    if space is None:
        raise ContractViolation("a parameter space is required to clip the reference volume")
    if dilation < 1.0:
        raise ContractViolation(f"dilation must be >= 1 (thickening), got {dilation}")
    return ReferenceVolume(valid_points, semi_axes, dilation, space)


def contains(ref: ReferenceVolume, point) -> bool:
    """True iff ``point`` lies inside the reference volume."""
    return ref.contains(point)
