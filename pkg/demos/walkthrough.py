"""Walk from mined scenarios to a costed acquisition plan.

Run with ``python3 demos/walkthrough.py``. Takes around half a minute.
"""

import numpy as np

from scenario_coverage import (
    CostAttributes,
    DegradableGenerator,
    ParameterSpace,
    QualityRequirements,
    SampleCloud,
    SyntheticSource,
    bootstrap_fit,
    build_reference_volume,
    coverage_coefficient,
    ellipsoid_volume,
    fit_generation_metamodel,
    mining_metamodel,
    optimize_acquisition,
    sensitivity_sweep,
)

space = ParameterSpace([0.0, 0.0], [10.0, 10.0], ("speed", "gap"))
semi_axes = [0.4, 0.4]

# Field recordings cluster around three typical manoeuvres.
recorded = SyntheticSource.gaussian_mixture(
    [[2.5, 2.5], [7.0, 6.0], [3.0, 8.0]], [1.0, 1.4, 0.8], seed=1
).draw(6000)
recorded = np.clip(recorded, space.lower, space.upper)

cloud = SampleCloud(space, 1 << 18, seed=2)
diag = bootstrap_fit(recorded, semi_axes, cloud, replicates=8, seed=3)
model = diag.model
print(f"mining model: a={model.a:.2f} b={model.b:.2e} c={model.c:.3f}  converged={diag.converged}")
print(f"parameter CV: {', '.join(f'{v:.4f}' for v in diag.param_cv)}")
print(f"observed volume {diag.mean_volumes[-1]:.2f} of asymptote {model.asymptote:.2f} "
      f"(coverage {coverage_coefficient(model, diag.mean_volumes[-1]):.3f})")

mining = mining_metamodel("recorded", CostAttributes(1000.0, 240.0), model, dims=2)

# A generator trained on the first k recordings; it strays less as k grows.
ref = build_reference_volume(recorded, semi_axes, 1.5, space)
generation = fit_generation_metamodel(
    [250, 500, 1000, 2000], recorded, DegradableGenerator(space, semi_axes, leak=1.0), ref,
    20_000, semi_axes=semi_axes, cloud=cloud, costs=CostAttributes(5000.0, 1.0, 20.0), seed=4,
)
for k, e in generation.error_rate.samples:
    print(f"entry {k:5d}: error rate {e:.4f}")

req = QualityRequirements(allowed_error=0.003, confidence_z=1.96, target_coverage=0.9)
plan = optimize_acquisition(mining, generation, req, kernel_volume=ellipsoid_volume(semi_axes))
print(f"\nplan: entry={plan.entry_point} mine={plan.n_mine} generate={plan.n_gen} "
      f"check={plan.n_check} total={plan.total_cost:,.0f}")

print("\ncost of one recorded scenario vs. total:")
for row in sensitivity_sweep("mining_cost", [30, 90, 240, 740], mining, generation, req,
                             kernel_volume=ellipsoid_volume(semi_axes)):
    print(f"  {row.axis_value:6.0f}  {row.total_cost:12,.0f}  entry={row.plan.entry_point}")
