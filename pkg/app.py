"""Command-line entry point: generate | uniform | bias | train | predict.

Experiments are described by JSON run configs; flags only cover paths, the
seed override, parallelism and verbosity. Every command finishes by writing
run_manifest.json into the output directory. On failure the files written so
far are removed and the exit code is 2 for config/data errors, 1 otherwise.
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Tuple

from common import (ConfigError, DataFormatError, LatticompError, ShapeError, config_hash, configure_logging,
                    get_default_jobs, get_out_dir)
from packages.Constants import SCHEMA_VERSION
from packages.config import RunConfig, load_run_config, parse_run_config
from packages.dataio.schema import DesignSpace, align_observations, export_csv, load_csv, sidecar_path, write_space
from packages.dataio.synthetic import generate_synthetic
from packages.evaluation.metrics import parity_data
from packages.evaluation.reports import (write_parity_csv, write_parity_svg, write_property_trials, write_reports,
                                         write_trials)
from packages.evaluation.sweeps import SweepResult, run_bias_sweep, run_uniform_sweep, standardized_pair
from packages.methods import fit_method
from packages.models.serialization import load_model, save_model
from packages.sampling import BiasedSamplingPlan, write_quota_table
from packages.tensor.core import DenseTensor, ObservationSet, all_cells, dense_to_observations

logger = logging.getLogger("latticomp")

USAGE_ERRORS = (ConfigError, DataFormatError, ShapeError)
CONFIG_REQUIRED = ("train", "predict")


class Outputs:
    """Files written by one command, relative to the output directory."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: List[str] = []

    def path(self, name: str) -> str:
        full = os.path.join(self.out_dir, name)
        self.files.append(name)
        return full

    def cleanup(self) -> None:
        for name in self.files:
            full = os.path.join(self.out_dir, name)
            if os.path.exists(full):
                os.remove(full)
                logger.debug("removed partial output %s", full)


def load_dataset(cfg: RunConfig) -> Tuple[ObservationSet, DesignSpace]:
    source = cfg.dataset
    if source.csv is not None:
        return load_csv(source.csv)
    tensor, space = generate_synthetic(source.synthetic)
    return dense_to_observations(tensor), space


def write_dataset(data, space: DesignSpace, outputs: Outputs, name: str) -> str:
    path = outputs.path(name)
    export_csv(data, space, path)
    write_space(space, outputs.path(os.path.basename(sidecar_path(path))))
    return path


def cmd_generate(cfg: RunConfig, outputs: Outputs, jobs: int) -> None:
    tensor, space = generate_synthetic(cfg.synthetic)
    path = write_dataset(tensor, space, outputs, "ground_truth.csv")
    logger.info("wrote %d cells to %s", tensor.shape.size, path)
    print(tensor.shape.size)


def _write_sweep_tables(result: SweepResult, space: DesignSpace, outputs: Outputs) -> None:
    trials = result.trial_results()
    write_trials(trials, outputs.path("trials.csv"))
    write_reports(result.reports, outputs.path("aggregated.csv"))
    if space.property_mode is not None:
        write_property_trials(trials, outputs.path("trials_by_property.csv"))


def cmd_uniform(cfg: RunConfig, outputs: Outputs, jobs: int) -> None:
    dataset, space = load_dataset(cfg)
    logger.info("uniform sweep on %s: sizes %s, %d iterations, methods %s", cfg.dataset.describe(),
                list(cfg.train_sizes), cfg.iterations, [m.name for m in cfg.methods])
    result = run_uniform_sweep(dataset, space, cfg.methods, cfg.train_sizes, cfg.iterations, cfg.seed, jobs,
                               cfg.record_timings)
    _write_sweep_tables(result, space, outputs)

    # parity plots come from the first iteration at the largest train size
    largest = max(cfg.train_sizes)
    trial = next(t for t in result.trials if t.group_key == largest and t.iteration == 0)
    labels = space.property_labels(trial.test.indices)
    for method in cfg.methods:
        raw = parity_data(trial.test.values, trial.predictions[method.name], labels)
        write_parity_csv(raw, outputs.path(f"parity_{method.name}.csv"))
        actual, predicted = standardized_pair(space, trial, method.name)
        standardized = parity_data(actual, predicted, labels)
        write_parity_csv(standardized, outputs.path(f"parity_{method.name}_standardized.csv"))
        write_parity_svg(standardized, outputs.path(f"parity_{method.name}.svg"),
                         f"{method.name}: {len(trial.train)} train / {len(trial.test)} test")


def cmd_bias(cfg: RunConfig, outputs: Outputs, jobs: int) -> None:
    dataset, space = load_dataset(cfg)
    logger.info("bias sweep on %s: experiments %s, %d iterations, quotas %s%s", cfg.dataset.describe(),
                list(cfg.e_nums), cfg.iterations, cfg.quota_source, " (fixed)" if cfg.fix_quotas else "")
    result = run_bias_sweep(dataset, space, cfg.methods, cfg.e_nums, cfg.iterations, cfg.seed, jobs,
                            cfg.fix_quotas, cfg.quota_source, cfg.record_timings)
    plans = [BiasedSamplingPlan(t.group_key, t.quotas, t.seed) for t in result.trials if t.iteration == 0]
    write_quota_table(plans, outputs.path("quota_table.csv"), space.levels[space.slice_mode])
    _write_sweep_tables(result, space, outputs)


def cmd_train(cfg: RunConfig, outputs: Outputs, jobs: int) -> None:
    train_obs, space = load_dataset(cfg)
    logger.info("training %s on %d cells of %s", cfg.method.name, len(train_obs), cfg.dataset.describe())
    fitted = fit_method(cfg.method, train_obs, space, cfg.seed, jobs)
    save_model(fitted, space, outputs.path("model.json"))
    if fitted.trace is not None:
        fitted.trace.to_csv(outputs.path("trace.csv"))
        logger.info("final train MAE %.6g after %d epochs", fitted.trace.train_mae[-1], fitted.trace.epochs_run)


def cmd_predict(cfg: RunConfig, outputs: Outputs, jobs: int) -> None:
    fitted, space = load_model(cfg.model)
    if cfg.dataset is not None:
        # cells are looked up by label in the model's design space, never by the dataset's own level order
        if cfg.dataset.csv is not None:
            target, _ = load_csv(cfg.dataset.csv, space)
        else:
            target, target_space = load_dataset(cfg)
            target = align_observations(target, target_space, space)
        predicted = ObservationSet(fitted.shape, target.indices, fitted.predict_many(target.indices))
    else:
        predicted = DenseTensor(fitted.shape, fitted.predict_many(all_cells(fitted.shape)))
    path = write_dataset(predicted, space, outputs, "predictions.csv")
    count = len(predicted.values) if isinstance(predicted, DenseTensor) else len(predicted)
    logger.info("wrote %d predictions to %s", count, path)


COMMANDS = {
    "generate": cmd_generate,
    "uniform": cmd_uniform,
    "bias": cmd_bias,
    "train": cmd_train,
    "predict": cmd_predict,
}


def write_manifest(cfg: RunConfig, command: str, outputs: Outputs) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": config_hash({**cfg.raw, "seed": cfg.seed}),
        "seed": cfg.seed,
        "files": sorted(outputs.files),
    }
    path = outputs.path("run_manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latticomp",
                                     description="Tensor-completion surrogates for design-space exploration.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run config (required for train and predict)")
    parser.add_argument("--out", help="output directory (LATTICOMP_OUT takes precedence)")
    parser.add_argument("--seed", type=int, help="override the config's base seed")
    parser.add_argument("--jobs", type=int, help="worker threads (default: LATTICOMP_JOBS or all cores)")
    parser.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(verbose=not args.quiet)
    outputs = None
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        if args.config:
            cfg = load_run_config(args.config, args.command, args.seed)
        elif args.command in CONFIG_REQUIRED:
            raise ConfigError(f"{args.command} needs --config")
        else:
            cfg = parse_run_config({"schema_version": SCHEMA_VERSION}, args.command, args.seed)
        jobs = args.jobs if args.jobs is not None else get_default_jobs()
        if jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {jobs}")

        out_dir = get_out_dir(args.out or cfg.output_dir)
        os.makedirs(out_dir, exist_ok=True)
        outputs = Outputs(out_dir)
        COMMANDS[args.command](cfg, outputs, jobs)
        write_manifest(cfg, args.command, outputs)
        logger.info("%s finished: %d files in %s", args.command, len(outputs.files), out_dir)
        return 0
    except USAGE_ERRORS as e:
        logger.error("%s", e)
        code = 2
    except LatticompError as e:
        logger.error("%s", e)
        code = 1
    except Exception as e:  # pylint: disable=broad-except
        logger.exception("unexpected failure: %s", e)
        code = 1
    if outputs is not None:
        outputs.cleanup()
    return code


if __name__ == "__main__":
    sys.exit(main())
