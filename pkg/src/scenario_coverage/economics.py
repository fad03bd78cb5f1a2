"""Check sizing and cost-optimal combination of mining and generation.

A generated dataset of ``n`` scenarios with initial error rate ``e_initial``
can be improved by checking ``n_improv`` scenarios and discarding invalid
ones, which lowers its error to ``e_opt``. Afterwards a random spot check of
Cochran size certifies that the error stays below the allowed rate. Spot
checks already covered by the improvement pass are not repeated.

All counts are ceilings of real intermediates. Ceilings absorb a relative
round-off of 1e-9 so that values such as ``4 * 0.25 / 0.01`` land on the
exact integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ContractViolation, UnreachableTargetError
from .fitting import required_count_for_volume
from .metamodel import GENERATION, MINING, AcquisitionMetaModel

_CEIL_RTOL = 1e-9
# e_opt stays strictly below the allowed error so that e_tol > 0
_ALLOWED_MARGIN = 1e-9
DEFAULT_GRID = 1000
# above this dataset size the plateau enumeration is replaced by local refinement
_MAX_ENUMERATION = 2_000_000

SWEEP_AXES = ("mining_cost", "allowed_error", "target_coverage", "validation_cost")


def _ceil(x: float) -> int:
    return math.ceil(x - _CEIL_RTOL * max(1.0, abs(x)))


def _ceil_array(x: np.ndarray) -> np.ndarray:
    return np.ceil(x - _CEIL_RTOL * np.maximum(1.0, np.abs(x)))


@dataclass(frozen=True)
class QualityRequirements:
    """Allowed final error rate, audit confidence and coverage target.

    Coverage is measured against ``complete_volume`` when given, otherwise
    against the asymptote of the mining model (the volume that unlimited
    real-world data would cover).
    """

    allowed_error: float
    confidence_z: float = 1.96
    target_coverage: float = 0.8
    complete_volume: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.allowed_error < 1.0:
            raise ContractViolation(f"allowed_error must lie in [0, 1), got {self.allowed_error}")
        if not (math.isfinite(self.confidence_z) and self.confidence_z > 0):
            raise ContractViolation(f"confidence_z must be > 0, got {self.confidence_z}")
        if not 0.0 < self.target_coverage < 1.0:
            raise ContractViolation(f"target_coverage must lie in (0, 1), got {self.target_coverage}")
        if self.complete_volume is not None and not (
            math.isfinite(self.complete_volume) and self.complete_volume > 0
        ):
            raise ContractViolation(f"complete_volume must be > 0, got {self.complete_volume}")


def improvement_count(n: int, e_initial: float, e_opt: float, *, legacy: bool = False) -> int:
    """Scenarios to check so the error falls from ``e_initial`` to ``e_opt``.

    Returns ``ceil(n * (1 - e_opt / e_initial))``. With ``legacy=True`` the
    factor ``n`` is dropped, which reproduces the dimensionless printed
    variant of this formula (it only ever yields 0 or 1).
    """
    if n < 0:
        raise ContractViolation(f"dataset size must be >= 0, got {n}")
    if not 0.0 <= e_opt <= e_initial <= 1.0:
        raise ContractViolation(
            f"need 0 <= e_opt <= e_initial <= 1, got e_opt={e_opt}, e_initial={e_initial}"
        )
    if e_initial == 0.0:
        return 0
    frac = 1.0 - e_opt / e_initial
    return max(_ceil(frac if legacy else n * frac), 0)


def cochran_sample(e_model: float, e_tol: float, z: float, *, min_audit: int = 0) -> int:
    """Cochran sample size ``ceil(z^2 e (1 - e) / e_tol^2)`` for a proportion.

    A zero-variance rate (0 or 1) needs no sample; ``min_audit`` enforces a
    floor when a non-empty audit is mandatory.
    """
    if not e_tol > 0:
        raise ContractViolation(f"e_tol must be > 0, got {e_tol}")
    if not z > 0:
        raise ContractViolation(f"z must be > 0, got {z}")
    if not 0.0 <= e_model <= 1.0:
        raise ContractViolation(f"e_model must lie in [0, 1], got {e_model}")
    if e_model in (0.0, 1.0):
        size = 0
    else:
        size = _ceil(z * z * e_model * (1.0 - e_model) / (e_tol * e_tol))
    return max(size, int(min_audit))


def corrected_sample(n_rand: int, n_improv: int, n: int) -> int:
    """Spot-check size left after ``n_improv`` of ``n`` scenarios were already checked."""
    if n < 1:
        raise ContractViolation(f"dataset size must be >= 1, got {n}")
    if not 0 <= n_improv <= n:
        raise ContractViolation(f"n_improv must lie in [0, {n}], got {n_improv}")
    return max(_ceil(n_rand - n_improv * n_rand / n), 0)


@dataclass(frozen=True)
class CheckPlan:
    n: int
    e_initial: float
    e_opt: float
    n_improv: int
    n_rand: int
    n_rand_corr: int
    n_check: int
    check_cost: float
    replacement_cost: float = 0.0
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _check_counts(n: int, e_initial: float, e_opt: np.ndarray, allowed: float, z: float, min_audit: int):
    """Vectorised twin of improvement_count / cochran_sample / corrected_sample."""
    n_improv = np.maximum(_ceil_array(n * (1.0 - e_opt / e_initial)), 0.0)
    tol = allowed - e_opt
    zero_var = (e_opt == 0.0) | (e_opt == 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        n_rand = np.where(zero_var, 0.0, _ceil_array(z * z * e_opt * (1.0 - e_opt) / (tol * tol)))
    # auditing more scenarios than exist is pointless
    n_rand = np.minimum(np.maximum(n_rand, float(min_audit)), float(n))
    n_corr = np.maximum(_ceil_array(n_rand - n_improv * n_rand / n), 0.0)
    return n_improv, n_rand, n_corr


def _plateau_starts(n: int, e_initial: float, lo: float, hi: float) -> np.ndarray:
    """Smallest error rate of each improvement-count plateau inside ``[lo, hi]``.

    The improvement count is constant on ``[e_i (1 - j/n), e_i (1 - (j-1)/n))``
    and the Cochran size grows with ``e_opt``, so within a plateau the left
    end is never worse than any other point.
    """
    j_lo = max(0, math.floor(n * (1.0 - hi / e_initial)))
    j_hi = min(n, math.ceil(n * (1.0 - lo / e_initial)))
    j = np.arange(j_lo, j_hi + 1, dtype=float)
    e = e_initial * (1.0 - j / n)
    return e[(e >= lo) & (e <= hi)]


def optimize_check(n: int, e_initial: float, req: QualityRequirements, *,
                   validation_cost: float = 1.0, replacement_cost: float = 0.0,
                   grid: int = DEFAULT_GRID, min_audit: int = 0) -> CheckPlan:
    """Choose the post-improvement error rate that minimises checking effort.

    The objective is ``validation_cost * n_check`` plus
    ``replacement_cost * n_improv * e_initial`` (regenerating the invalid
    scenarios found while improving). With the defaults this is plain
    ``n_check``. The search evaluates a uniform grid over
    ``[0, min(e_initial, allowed_error))`` and refines it with the left ends
    of the improvement-count plateaus (all of them when ``n`` is moderate,
    otherwise those near the best grid points). Ties go to fewer checks,
    then to the larger error rate.
    """
    n = int(n)
    if n < 0:
        raise ContractViolation(f"dataset size must be >= 0, got {n}")
    if not 0.0 <= e_initial < 1.0:
        raise ContractViolation(f"e_initial must lie in [0, 1), got {e_initial}")
    allowed, z = req.allowed_error, req.confidence_z
    if n == 0:
        return CheckPlan(0, e_initial, e_initial, 0, 0, 0, 0, 0.0)
    if allowed <= 0.0:
        return CheckPlan(n, e_initial, 0.0, n, 0, 0, n, validation_cost * n,
                         replacement_cost * n * e_initial,
                         note="allowed error is 0: every scenario has to be checked")
    if e_initial == 0.0:
        n_rand = min(cochran_sample(0.0, allowed, z, min_audit=min_audit), n)
        n_corr = corrected_sample(n_rand, 0, n)
        return CheckPlan(n, 0.0, 0.0, 0, n_rand, n_corr, n_corr, validation_cost * n_corr)

    cap = min(e_initial, allowed * (1.0 - _ALLOWED_MARGIN))
    coarse = np.linspace(0.0, cap, max(2, int(grid)))

    def objective(e):
        n_improv, _, n_corr = _check_counts(n, e_initial, e, allowed, z, min_audit)
        n_check = n_improv + n_corr
        return validation_cost * n_check + replacement_cost * n_improv * e_initial, n_check

    if n <= _MAX_ENUMERATION:
        candidates = np.concatenate([coarse, _plateau_starts(n, e_initial, 0.0, cap)])
    else:
        cost, _ = objective(coarse)
        best = np.argsort(cost, kind="stable")[:8]
        pieces = [coarse]
        for i in best:
            lo, hi = coarse[max(i - 1, 0)], coarse[min(i + 1, coarse.size - 1)]
            pieces.append(_plateau_starts(n, e_initial, lo, hi))
        candidates = np.concatenate(pieces)
    cost, n_check = objective(candidates)
    pick = np.lexsort((-candidates, n_check, cost))[0]
    e_opt = float(candidates[pick])

    n_improv = improvement_count(n, e_initial, e_opt)
    n_rand = min(cochran_sample(e_opt, allowed - e_opt, z, min_audit=min_audit), n)
    n_corr = corrected_sample(n_rand, n_improv, n)
    total = n_improv + n_corr
    return CheckPlan(n, e_initial, e_opt, n_improv, n_rand, n_corr, total,
                     validation_cost * total, replacement_cost * n_improv * e_initial)


@dataclass(frozen=True)
class AcquisitionPlan:
    """Mined count, generated count and checks for one acquisition strategy.

    ``entry_point`` is the number of mined scenarios the generator is seeded
    with, or None for pure mining. ``generation_cost`` includes regenerating
    the scenarios discarded during improvement.
    """

    entry_point: int | None
    n_mine: int
    n_gen: int
    check: CheckPlan | None
    setup_cost: float
    mining_cost: float
    generation_cost: float
    checking_cost: float
    total_cost: float
    feasible: bool
    achieved_coverage: float
    target_volume: float
    final_error: float
    note: str = ""

    @property
    def n_check(self) -> int:
        return self.check.n_check if self.check is not None else 0

    def to_dict(self) -> dict:
        data = dict(self.__dict__)
        data["check"] = self.check.to_dict() if self.check is not None else None
        data["n_check"] = self.n_check
        return data


def _infeasible(entry, n_mine, target, coverage, note) -> AcquisitionPlan:
    return AcquisitionPlan(entry, n_mine, 0, None, math.inf, math.inf, math.inf, math.inf, math.inf,
                           False, coverage, target, math.nan, note)


def _validate_pair(mining: AcquisitionMetaModel, generation: AcquisitionMetaModel):
    if mining.kind != MINING:
        raise ContractViolation(f"{mining.name!r} is not a mining model")
    if generation.kind != GENERATION:
        raise ContractViolation(f"{generation.name!r} is not a generation model")
    if not generation.coverage_models:
        raise ContractViolation("generation model has no coverage entries")
    if mining.dims is not None and generation.dims is not None and mining.dims != generation.dims:
        raise ContractViolation(f"models disagree on dimensionality ({mining.dims} vs {generation.dims})")


def evaluate_entry_points(mining: AcquisitionMetaModel, generation: AcquisitionMetaModel,
                          req: QualityRequirements, *, kernel_volume: float | None = None,
                          min_audit: int = 0, grid: int = DEFAULT_GRID) -> list[AcquisitionPlan]:
    """Cost every candidate strategy: pure mining, then each generation entry point.

    The coverage target is ``target_coverage`` times the complete volume
    (see :class:`QualityRequirements`). A candidate whose asymptote lies at
    or below the target can never reach it and is reported infeasible.
    """
    _validate_pair(mining, generation)
    mined_model = mining.coverage_models[0][1]
    complete = req.complete_volume if req.complete_volume is not None else mined_model.asymptote
    target = req.target_coverage * complete
    plans = []

    if mined_model.asymptote <= target:
        plans.append(_infeasible(None, 0, target, mined_model.asymptote / complete,
                                 "requested coverage lies above the mining saturation limit"))
    else:
        n_mine = required_count_for_volume(mined_model, target, kernel_volume)
        mine_cost = n_mine * mining.costs.gaining
        plans.append(AcquisitionPlan(
            None, n_mine, 0, None, mining.costs.setup, mine_cost, 0.0, 0.0,
            mining.costs.setup + mine_cost, True, mined_model(n_mine) / complete, target, 0.0,
            "mining only",
        ))

    for k, model in generation.coverage_models:
        if model.asymptote <= target:
            plans.append(_infeasible(k, k, target, model.asymptote / complete,
                                     "requested coverage lies above this entry point's saturation limit"))
            continue
        e_initial = generation.error_rate(k)
        if e_initial >= 1.0:
            plans.append(_infeasible(k, k, target, model.v_pre / complete, "generator error rate is 1"))
            continue
        try:
            n_gen = required_count_for_volume(model, target, kernel_volume)
        except UnreachableTargetError:
            plans.append(_infeasible(k, k, target, model.asymptote / complete, "target unreachable"))
            continue
        check = optimize_check(n_gen, e_initial, req, validation_cost=generation.costs.validation,
                               replacement_cost=generation.costs.gaining, grid=grid, min_audit=min_audit)
        setup = mining.costs.setup + (generation.costs.setup if n_gen > 0 else 0.0)
        mine_cost = k * mining.costs.gaining
        gen_cost = n_gen * generation.costs.gaining + check.replacement_cost
        total = setup + mine_cost + gen_cost + check.check_cost
        plans.append(AcquisitionPlan(
            k, k, n_gen, check, setup, mine_cost, gen_cost, check.check_cost, total,
            True, float(model(n_gen)) / complete, target, check.e_opt if n_gen else 0.0,
        ))
    return plans


def optimize_acquisition(mining: AcquisitionMetaModel, generation: AcquisitionMetaModel,
                         req: QualityRequirements, **kwargs) -> AcquisitionPlan:
    """Cheapest strategy meeting the coverage and error requirements.

    When nothing is feasible the returned plan has ``feasible=False`` and
    is the candidate reaching the highest coverage.
    """
    plans = evaluate_entry_points(mining, generation, req, **kwargs)
    feasible = [p for p in plans if p.feasible]
    if feasible:
        return min(feasible, key=lambda p: (p.total_cost, p.n_mine, p.n_gen))
    return max(plans, key=lambda p: p.achieved_coverage)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    total_cost: float
    n_mine: int
    n_gen: int
    n_check: int
    feasible: bool
    checking_cost: float
    plan: AcquisitionPlan


def _substitute(axis, value, mining, generation, req):
    if axis == "mining_cost":
        mining = replace(mining, costs=replace(mining.costs, gaining=float(value)))
    elif axis == "validation_cost":
        generation = replace(generation, costs=replace(generation.costs, validation=float(value)))
    elif axis == "allowed_error":
        req = replace(req, allowed_error=float(value))
    elif axis == "target_coverage":
        req = replace(req, target_coverage=float(value))
    else:
        raise ContractViolation(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return mining, generation, req


def sensitivity_sweep(axis: str, values: Sequence[float], mining: AcquisitionMetaModel,
                      generation: AcquisitionMetaModel, req: QualityRequirements,
                      **kwargs) -> list[SweepRow]:
    """Re-run :func:`optimize_acquisition` with one input replaced by each value."""
    if axis not in SWEEP_AXES:
        raise ContractViolation(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if len(values) == 0:
        raise ContractViolation("a sweep needs at least one value")
    rows = []
    for value in values:
        plan = optimize_acquisition(*_substitute(axis, value, mining, generation, req), **kwargs)
        rows.append(SweepRow(float(value), plan.total_cost, plan.n_mine, plan.n_gen, plan.n_check,
                             plan.feasible, plan.checking_cost, plan))
    return rows


SWEEP_HEADER = ("axis_value", "total_cost", "n_mine", "n_gen", "n_check", "feasible")


def sweep_table(rows: Sequence[SweepRow]) -> list[tuple]:
    return [(r.axis_value, r.total_cost, r.n_mine, r.n_gen, r.n_check, r.feasible) for r in rows]

