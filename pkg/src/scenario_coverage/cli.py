"""Batch command-line front end.

Subcommands ``coverage``, ``metamodel``, ``plan`` and ``synth`` share one
TOML configuration file. Exit codes: 0 success, 2 input or contract error,
3 fit did not converge, 4 no feasible plan.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .dataio import config_digest, read_parameter_csv, write_csv, write_json, write_parameter_csv
from .economics import (
    SWEEP_AXES,
    SWEEP_HEADER,
    QualityRequirements,
    evaluate_entry_points,
    optimize_acquisition,
    sensitivity_sweep,
    sweep_table,
)
from .errors import ContractViolation, FitError, MetamodelFitError, ScenarioCoverageError
from .fitting import DEFAULT_CV_THRESHOLD, DEFAULT_REPLICATES, bootstrap_fit, coverage_coefficient
from .geometry import (
    DEFAULT_DILATION,
    DEFAULT_SAMPLES,
    ParameterSpace,
    SampleCloud,
    build_reference_volume,
    ellipsoid_volume,
)
from .metamodel import (
    GENERATION,
    MINING,
    AcquisitionMetaModel,
    CostAttributes,
    fit_generation_metamodel,
    mining_metamodel,
)
from .synthetic import DegradableGenerator, ReplayGenerator, SyntheticSource

log = logging.getLogger("scenario_coverage")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_INFEASIBLE = 0, 2, 3, 4

# stream tags for deriving independent seeds from the run seed
_CLOUD, _BOOTSTRAP, _METAMODEL, _SYNTH = 1, 2, 3, 4


class ConfigError(ContractViolation):
    pass


def derive_seed(seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1, dtype=np.uint64)[0])


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value


def _costs(data: dict, name: str) -> CostAttributes:
    table = _section(_section(data, "costs"), name)
    try:
        return CostAttributes(**{k: float(table.get(k, 0.0)) for k in ("setup", "gaining", "validation")})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[costs.{name}]: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Fully validated settings for one run."""

    seed: int
    space: ParameterSpace
    semi_axes: tuple[float, ...]
    cloud_samples: int
    cloud_seed: int
    dilation: float
    replicates: int
    cv_threshold: float
    quality: QualityRequirements
    min_audit: int
    mining_name: str
    mining_costs: CostAttributes
    generation_costs: CostAttributes
    metamodel: dict
    sweep: dict | None
    synth: dict | None
    out: str

    @classmethod
    def from_mapping(cls, data: dict, seed: int | None = None, out: str | None = None) -> "RunConfig":
        try:
            return cls._build(data, seed, out)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    @classmethod
    def _build(cls, data, seed, out):
        run_seed = int(seed if seed is not None else data.get("seed", 0))
        if not 0 <= run_seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {run_seed}")

        space_t = _section(data, "space")
        if "lower" not in space_t or "upper" not in space_t:
            raise ConfigError("[space] needs 'lower' and 'upper'")
        space = ParameterSpace(space_t["lower"], space_t["upper"], tuple(space_t.get("names", ())))

        kernel = _section(data, "kernel")
        semi = kernel.get("semi_axes", space_t.get("semi_axes"))
        if semi is None:
            raise ConfigError("[kernel] needs 'semi_axes'")
        semi = [float(v) for v in (semi if isinstance(semi, list) else [semi] * space.dims)]
        if len(semi) != space.dims or any(not v > 0 for v in semi):
            raise ConfigError(f"semi_axes must be {space.dims} positive numbers")

        cloud = _section(data, "cloud")
        samples = int(cloud.get("samples", DEFAULT_SAMPLES))
        if samples < 1:
            raise ConfigError("[cloud] samples must be positive")
        cloud_seed = int(cloud["seed"]) if "seed" in cloud and seed is None else derive_seed(run_seed, _CLOUD)

        dilation = float(_section(data, "reference").get("dilation", DEFAULT_DILATION))
        if dilation < 1.0:
            raise ConfigError("[reference] dilation must be >= 1")

        fitting = _section(data, "fitting")
        replicates = int(fitting.get("replicates", DEFAULT_REPLICATES))
        cv_threshold = float(fitting.get("cv_threshold", DEFAULT_CV_THRESHOLD))
        if replicates < 2 or cv_threshold <= 0:
            raise ConfigError("[fitting] needs replicates >= 2 and cv_threshold > 0")

        q = _section(data, "quality")
        complete = q.get("complete_volume")
        quality = QualityRequirements(
            float(q.get("allowed_error", 0.05)), float(q.get("z", 1.96)), float(q.get("target_coverage", 0.8)),
            None if complete is None else float(complete),
        )
        min_audit = int(q.get("min_audit", 0))

        mm = _section(data, "metamodel")
        generator = mm.get("generator")
        if generator is not None:
            if not isinstance(generator, dict) or generator.get("kind") not in ("degradable", "replay"):
                raise ConfigError("[metamodel.generator] kind must be 'degradable' or 'replay'")
            if generator["kind"] == "degradable":
                leak = float(generator.get("leak", 1.0))
                if not 0.0 <= leak <= 1.0:
                    raise ConfigError("[metamodel.generator] leak must lie in [0, 1]")
                generator = {"kind": "degradable", "leak": leak}
            else:
                generator = {"kind": "replay"}
        grid = [int(k) for k in mm.get("grid", [500, 1000, 2000, 5000])]
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ConfigError("[metamodel] grid must be positive and strictly increasing")
        metamodel = {
            "name": str(mm.get("name", GENERATION)),
            "grid": grid,
            "per_grid": int(mm.get("per_grid", 50_000)),
            "generator": generator,
        }
        if metamodel["per_grid"] < 1:
            raise ConfigError("[metamodel] per_grid must be positive")

        sweep = None
        if "sweep" in data:
            s = _section(data, "sweep")
            if s.get("axis") not in SWEEP_AXES:
                raise ConfigError(f"[sweep] axis must be one of {SWEEP_AXES}")
            values = [float(v) for v in s.get("values", [])]
            if not values:
                raise ConfigError("[sweep] values must be a non-empty list")
            sweep = {"axis": s["axis"], "values": values}

        synth = None
        if "synth" in data:
            s = _section(data, "synth")
            kind = s.get("kind", "uniform_box")
            if kind not in ("uniform_box", "gaussian_mixture"):
                raise ConfigError("[synth] kind must be 'uniform_box' or 'gaussian_mixture'")
            synth = {"kind": kind, "count": int(s.get("count", 1000)), "clip": bool(s.get("clip", True))}
            if synth["count"] < 0:
                raise ConfigError("[synth] count must be >= 0")
            if kind == "gaussian_mixture":
                synth.update(means=s["means"], stds=s["stds"], weights=s.get("weights"))
                # validate parameters before any computation
                SyntheticSource.gaussian_mixture(synth["means"], synth["stds"], synth["weights"])
                if len(synth["means"][0]) != space.dims:
                    raise ConfigError("[synth] means must have one coordinate per dimension")

        out_dir = out if out is not None else str(_section(data, "paths").get("out", "."))
        return cls(
            seed=run_seed,
            space=space,
            semi_axes=tuple(semi),
            cloud_samples=samples,
            cloud_seed=cloud_seed,
            dilation=dilation,
            replicates=replicates,
            cv_threshold=cv_threshold,
            quality=quality,
            min_audit=min_audit,
            mining_name=str(_section(_section(data, "costs"), MINING).get("name", MINING)),
            mining_costs=_costs(data, MINING),
            generation_costs=_costs(data, GENERATION),
            metamodel=metamodel,
            sweep=sweep,
            synth=synth,
            out=out_dir,
        )

    def resolved(self) -> dict:
        """Plain-data view of the configuration (what the digest covers)."""
        q = self.quality
        return {
            "seed": self.seed,
            "space": self.space.to_dict(),
            "kernel": {"semi_axes": list(self.semi_axes)},
            "cloud": {"samples": self.cloud_samples, "seed": self.cloud_seed},
            "reference": {"dilation": self.dilation},
            "fitting": {"replicates": self.replicates, "cv_threshold": self.cv_threshold},
            "quality": {"allowed_error": q.allowed_error, "z": q.confidence_z,
                        "target_coverage": q.target_coverage, "complete_volume": q.complete_volume,
                        "min_audit": self.min_audit},
            "costs": {MINING: dict(self.mining_costs.to_dict(), name=self.mining_name),
                      GENERATION: self.generation_costs.to_dict()},
            "metamodel": self.metamodel,
            "sweep": self.sweep,
            "synth": self.synth,
        }

    @property
    def digest(self) -> str:
        return config_digest(self.resolved())

    @property
    def provenance(self) -> dict:
        return {"config_sha256": self.digest, "seed": self.seed, "version": __version__}

    @property
    def comment(self) -> str:
        return f"config_sha256={self.digest} seed={self.seed}"

    def cloud(self) -> SampleCloud:
        return SampleCloud(self.space, self.cloud_samples, self.cloud_seed)


def load_config(path, seed=None, out=None) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_mapping(data, seed=seed, out=out)


def _out(cfg: RunConfig, name: str) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path / name


def cmd_coverage(args, cfg: RunConfig) -> int:
    _, points = read_parameter_csv(args.input, cfg.space.dims)
    diag = bootstrap_fit(points, cfg.semi_axes, cfg.cloud(), cfg.replicates,
                         derive_seed(cfg.seed, _BOOTSTRAP), cv_threshold=cfg.cv_threshold,
                         workers=args.threads)
    model = diag.model
    final = float(diag.mean_volumes[-1])
    ratio = final / model.asymptote
    try:
        coverage = coverage_coefficient(model, final)
    except ScenarioCoverageError:
        # the fit undershoots the data; the coefficient itself is capped at 1
        coverage = min(1.0, max(0.0, ratio))
        log.warning("observed volume is %.6f x the fitted asymptote", ratio)

    write_csv(_out(cfg, "coverage_curve.csv"), ("count", "volume", "model_volume"),
              zip(diag.counts, diag.mean_volumes, model(diag.counts)), cfg.comment)
    write_json(_out(cfg, "coverage_model.json"), {
        "model": model.to_dict(),
        "diagnostics": diag.to_dict(),
        "inputs": int(points.shape[0]),
        "final_volume": final,
        "coverage": coverage,
        "observed_to_asymptote": ratio,
        "space_volume": cfg.space.volume,
        "kernel_volume": ellipsoid_volume(cfg.semi_axes),
        "provenance": cfg.provenance,
    })
    mining = mining_metamodel(cfg.mining_name, cfg.mining_costs, model, cfg.space.dims)
    write_json(_out(cfg, "mining_metamodel.json"), dict(mining.to_dict(), provenance=cfg.provenance))
    log.info("coverage %.4f, a=%.6g b=%.6g c=%.6g, CV(a)=%.4g", coverage, model.a, model.b, model.c,
             diag.param_cv[0])
    if not diag.converged:
        log.warning("saturation limit did not converge (CV(a)=%.4g > %.4g)", diag.param_cv[0], cfg.cv_threshold)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_metamodel(args, cfg: RunConfig) -> int:
    spec = cfg.metamodel["generator"]
    if spec is None:
        raise ConfigError("[metamodel.generator] is required for the metamodel command")
    _, points = read_parameter_csv(args.input, cfg.space.dims)
    if cfg.metamodel["grid"][-1] > points.shape[0]:
        raise ConfigError(
            f"grid value {cfg.metamodel['grid'][-1]} exceeds the {points.shape[0]} mined points available"
        )
    if spec["kind"] == "degradable":
        generator = DegradableGenerator(cfg.space, cfg.semi_axes, spec["leak"])
    else:
        generator = ReplayGenerator()
    ref = build_reference_volume(points, cfg.semi_axes, cfg.dilation, cfg.space)
    model = fit_generation_metamodel(
        cfg.metamodel["grid"], points, generator, ref, cfg.metamodel["per_grid"],
        semi_axes=cfg.semi_axes, cloud=cfg.cloud(), costs=cfg.generation_costs,
        name=cfg.metamodel["name"], seed=derive_seed(cfg.seed, _METAMODEL),
    )
    write_json(_out(cfg, f"{model.name}_metamodel.json"), dict(model.to_dict(), provenance=cfg.provenance))
    for k, e in model.error_rate.samples:
        log.info("entry %d: error rate %.5f", k, e)
    return EXIT_OK


def _format_plan(plans, best) -> str:
    lines = [f"{'entry':>8} {'n_mine':>9} {'n_gen':>9} {'n_check':>8} {'coverage':>9} {'total_cost':>14}  feasible"]
    for p in plans:
        entry = "mining" if p.entry_point is None else str(p.entry_point)
        mark = " *" if p is best else ""
        lines.append(f"{entry:>8} {p.n_mine:>9d} {p.n_gen:>9d} {p.n_check:>8d} {p.achieved_coverage:>9.4f} "
                     f"{p.total_cost:>14.2f}  {p.feasible}{mark}")
    return "\n".join(lines) + "\n"


def cmd_plan(args, cfg: RunConfig) -> int:
    models = []
    for path in args.models:
        try:
            models.append(AcquisitionMetaModel.from_json(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load meta model {path}: {exc}") from exc
    mining = [m for m in models if m.kind == MINING]
    generation = [m for m in models if m.kind == GENERATION]
    if len(mining) != 1 or len(generation) != 1:
        raise ConfigError("plan needs exactly one mining and one generation meta model")
    mining, generation = mining[0], generation[0]
    for m in (mining, generation):
        if m.dims is not None and m.dims != cfg.space.dims:
            raise ConfigError(f"meta model {m.name!r} has {m.dims} dimensions, configuration has {cfg.space.dims}")

    options = {"kernel_volume": ellipsoid_volume(cfg.semi_axes), "min_audit": cfg.min_audit}
    plans = evaluate_entry_points(mining, generation, cfg.quality, **options)
    best = optimize_acquisition(mining, generation, cfg.quality, **options)
    best = next(p for p in plans if p == best)
    table = _format_plan(plans, best)
    sys.stdout.write(table)
    _out(cfg, "plan.txt").write_text(table, encoding="utf-8")
    write_json(_out(cfg, "plan.json"), {
        "plan": best.to_dict(),
        "candidates": [p.to_dict() for p in plans],
        "requirements": cfg.resolved()["quality"],
        "models": {"mining": mining.name, "generation": generation.name},
        "provenance": cfg.provenance,
    })
    if cfg.sweep is not None:
        rows = sensitivity_sweep(cfg.sweep["axis"], cfg.sweep["values"], mining, generation, cfg.quality, **options)
        write_csv(_out(cfg, "sweep.csv"), SWEEP_HEADER, sweep_table(rows), cfg.comment)
    if not best.feasible:
        log.warning("no feasible plan: best reachable coverage %.4f", best.achieved_coverage)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    spec = cfg.synth
    if spec is None:
        raise ConfigError("[synth] section is required for the synth command")
    seed = derive_seed(cfg.seed, _SYNTH)
    if spec["kind"] == "uniform_box":
        source = SyntheticSource.uniform_box(cfg.space, seed)
    else:
        source = SyntheticSource.gaussian_mixture(spec["means"], spec["stds"], spec["weights"], seed)
    points = source.draw(spec["count"])
    if spec["clip"]:
        points = points[cfg.space.contains(points)] if points.shape[0] else points
    write_parameter_csv(_out(cfg, "synth.csv"), cfg.space.names, points, cfg.comment)
    log.info("wrote %d parameter sets", points.shape[0])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override the configured seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")

    parser = argparse.ArgumentParser(prog="scenario-coverage", parents=[common], description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coverage", parents=[common], help="bootstrap a coverage saturation fit")
    p.add_argument("input", help="parameter-set CSV")
    p.set_defaults(handler=cmd_coverage)

    p = sub.add_parser("metamodel", parents=[common], help="fit a generation meta model")
    p.add_argument("input", help="mined parameter-set CSV (seed data and reference set)")
    p.set_defaults(handler=cmd_metamodel)

    p = sub.add_parser("plan", parents=[common], help="cost-optimal acquisition plan")
    p.add_argument("models", nargs="+", help="mining and generation meta model JSON files")
    p.set_defaults(handler=cmd_plan)

    p = sub.add_parser("synth", parents=[common], help="write synthetic parameter sets")
    p.set_defaults(handler=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.threads = max(1, getattr(args, "threads", 1))
    if not logging.getLogger().handlers:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if not hasattr(args, "config"):
        log.error("--config is required")
        return EXIT_INPUT
    try:
        cfg = load_config(args.config, getattr(args, "seed", None), getattr(args, "out", None))
        log.info("resolved config: %s", json.dumps(cfg.resolved(), sort_keys=True))
        return args.handler(args, cfg)
    except (FitError, MetamodelFitError) as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except ScenarioCoverageError as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
