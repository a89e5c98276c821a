"""Experiment protocols: uniform train-size sweep and the biased-sampling sweep.

Each (group, iteration) pair is one trial. A trial draws one training set,
fits every method on exactly that set and scores it on the full complement.
Trials are independent and may run on a thread pool; results are keyed by
trial ordinal and reduced in that order, so reports do not depend on --jobs.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common import ConfigError, ObservationError, derive_seed
from packages.Constants import BIAS_EXPERIMENTS, DEFAULT_BASE_SEED, DEFAULT_ITERATIONS
from packages.dataio.schema import DesignSpace
from packages.evaluation.metrics import (joint_standardized_r2, mae, per_property_r2, property_stats, r2,
                                         standardize)
from packages.methods import MethodSpec, fit_method
from packages.sampling import BiasedSamplingPlan, biased_sample, uniform_sample
from packages.tensor.core import ObservationSet, split_observations

logger = logging.getLogger(__name__)

QUOTA_SOURCES = ("drawn", "reference")


@dataclass(frozen=True)
class TrialResult:
    method: str
    group_key: int
    iteration: int
    seed: int
    train_size: int
    r2: float
    mae: float
    train_seconds: float = 0.0
    r2_by_property: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.train_size < 1:
            raise ObservationError(f"train size must be >= 1, got {self.train_size}")
        if not self.mae >= 0:
            raise ObservationError(f"mae must be >= 0, got {self.mae}")


@dataclass(frozen=True)
class ExperimentReport:
    """Mean and population std of one method's trials within one group."""

    method: str
    group_key: int
    mean_r2: float
    std_r2: float
    mean_mae: float
    std_mae: float
    iterations: int

    @classmethod
    def from_trials(cls, trials: Sequence[TrialResult]) -> "ExperimentReport":
        if not trials:
            raise ObservationError("cannot aggregate an empty list of trials")
        r2s = np.asarray([t.r2 for t in trials])
        maes = np.asarray([t.mae for t in trials])
        return cls(trials[0].method, trials[0].group_key, float(r2s.mean()), float(r2s.std()),
                   float(maes.mean()), float(maes.std()), len(trials))


@dataclass
class Trial:
    """One training split and what every method predicted on its complement."""

    group_key: int
    iteration: int
    seed: int
    train: ObservationSet
    test: ObservationSet
    results: List[TrialResult] = field(default_factory=list)
    predictions: Dict[str, np.ndarray] = field(default_factory=dict)
    quotas: Optional[Tuple[int, ...]] = None


@dataclass
class SweepResult:
    reports: List[ExperimentReport]
    trials: List[Trial]

    def trial_results(self) -> List[TrialResult]:
        return [r for t in self.trials for r in t.results]


def trial_seed(base_seed: int, group_key: int, iteration: int) -> int:
    return derive_seed(base_seed, group_key, iteration)


def method_seed(seed: int, method_name: str) -> int:
    return derive_seed(seed, method_name)


def score(space: DesignSpace, train: ObservationSet, test: ObservationSet,
          predicted: np.ndarray) -> Tuple[float, float, Dict[str, float]]:
    """(r2, mae, raw r2 per property) for predictions on the test cells.

    With a property mode, r2 is taken jointly over all properties after
    z-scoring each one by its training-cell mean and std.
    """
    test_labels = space.property_labels(test.indices)
    error = mae(test.values, predicted)
    if space.property_mode is None:
        return r2(test.values, predicted), error, {}
    stats = property_stats(train.values, space.property_labels(train.indices))
    joint = joint_standardized_r2(test.values, predicted, test_labels, stats)
    return joint, error, per_property_r2(test.values, predicted, test_labels)


def standardized_pair(space: DesignSpace, trial: Trial, method: str) -> Tuple[np.ndarray, np.ndarray]:
    """Test actuals and predictions z-scored with the trial's training statistics."""
    labels = space.property_labels(trial.test.indices)
    if space.property_mode is None:
        return trial.test.values, trial.predictions[method]
    stats = property_stats(trial.train.values, space.property_labels(trial.train.indices))
    return standardize(trial.test.values, labels, stats), standardize(trial.predictions[method], labels, stats)


def run_trial(dataset: ObservationSet, space: DesignSpace, methods: Sequence[MethodSpec], train_indices,
              group_key: int, iteration: int, seed: int, jobs: int = 1, record_timings: bool = False) -> Trial:
    train, test = split_observations(dataset, train_indices)
    if len(test) == 0:
        raise ObservationError(f"trial {group_key}/{iteration} leaves no cells to evaluate on")
    if train.index_set() & test.index_set():
        raise ObservationError(f"trial {group_key}/{iteration}: train and test share cells")
    trial = Trial(group_key, iteration, seed, train, test)
    for method in methods:
        started = time.perf_counter()
        fitted = fit_method(method, train, space, method_seed(seed, method.name), jobs)
        elapsed = time.perf_counter() - started if record_timings else 0.0
        predicted = fitted.predict_many(test.indices)
        r2_value, mae_value, by_property = score(space, train, test, predicted)
        trial.predictions[method.name] = predicted
        trial.results.append(TrialResult(method.name, group_key, iteration, seed, len(train),
                                         r2_value, mae_value, elapsed, by_property))
    return trial


def _run_trials(jobs_spec: List[Tuple[int, int]], make_trial: Callable[[int, int, int], Trial], jobs: int,
                label: str) -> List[Trial]:
    """Run make_trial(group, iteration, inner_jobs) for every pair, returned in input order."""
    n = len(jobs_spec)
    results: Dict[int, Trial] = {}
    if jobs > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=jobs) as exe:
            futures = {exe.submit(make_trial, g, it, 1): k for k, (g, it) in enumerate(jobs_spec)}
            for done, fut in enumerate(as_completed(futures), start=1):
                k = futures[fut]
                results[k] = fut.result()
                logger.info("%s trial %s done (%d/%d)", label, jobs_spec[k], done, n)
    else:
        for k, (g, it) in enumerate(jobs_spec):
            results[k] = make_trial(g, it, max(jobs, 1))
            logger.info("%s trial %s done (%d/%d)", label, (g, it), k + 1, n)
    return [results[k] for k in range(n)]


def aggregate(trials: Sequence[Trial], methods: Sequence[MethodSpec]) -> List[ExperimentReport]:
    """One report per (group, method), groups ascending, methods in config order."""
    reports = []
    for group in sorted({t.group_key for t in trials}):
        in_group = sorted((t for t in trials if t.group_key == group), key=lambda t: t.iteration)
        for method in methods:
            reports.append(ExperimentReport.from_trials(
                [r for t in in_group for r in t.results if r.method == method.name]))
    return reports


def _check_common(methods: Sequence[MethodSpec], iterations: int) -> None:
    if not methods:
        raise ConfigError("at least one method is required")
    if int(iterations) < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")


def run_uniform_sweep(dataset: ObservationSet, space: DesignSpace, methods: Sequence[MethodSpec],
                      train_sizes: Sequence[int], iterations: int = DEFAULT_ITERATIONS,
                      base_seed: int = DEFAULT_BASE_SEED, jobs: int = 1,
                      record_timings: bool = False) -> SweepResult:
    """Uniformly sampled training sets of each size, scored on the complement.

    Args:
        dataset: every known cell of the ground truth.
        space: design space of the dataset.
        methods: methods to fit on each training set; all of them see the same cells.
        train_sizes: training set sizes, each below the dataset size.
        iterations: trials per size.
        base_seed: root of the per-trial seeds.
        jobs: worker threads. Results do not depend on it.
        record_timings: store fit wall times instead of 0.

    Returns:
        SweepResult with one report per (size, method) and the raw trials.

    Raises:
        ConfigError: empty sizes or methods, a size out of range, or iterations < 1.
    """
    _check_common(methods, iterations)
    if not train_sizes:
        raise ConfigError("train_sizes must not be empty")
    for size in train_sizes:
        if not 1 <= int(size) < len(dataset):
            raise ConfigError(f"train size {size} must be in [1, {len(dataset) - 1}]")

    def make_trial(size: int, iteration: int, inner_jobs: int) -> Trial:
        seed = trial_seed(base_seed, size, iteration)
        chosen = uniform_sample(dataset.indices, size, seed)
        return run_trial(dataset, space, methods, chosen, size, iteration, seed, inner_jobs, record_timings)

    pairs = [(int(size), it) for size in train_sizes for it in range(int(iterations))]
    trials = _run_trials(pairs, make_trial, jobs, "uniform")
    return SweepResult(aggregate(trials, methods), trials)


def bias_plan(e_num: int, seed: int, n_slices: int, quota_source: str = "drawn") -> BiasedSamplingPlan:
    if quota_source == "reference":
        return BiasedSamplingPlan.reference(e_num)
    if quota_source == "drawn":
        return BiasedSamplingPlan.drawn(e_num, seed, n_slices)
    raise ConfigError(f"quota_source must be one of {QUOTA_SOURCES}, got {quota_source!r}")


def run_bias_sweep(dataset: ObservationSet, space: DesignSpace, methods: Sequence[MethodSpec],
                   e_nums: Sequence[int] = BIAS_EXPERIMENTS, iterations: int = DEFAULT_ITERATIONS,
                   base_seed: int = DEFAULT_BASE_SEED, jobs: int = 1, fix_quotas: bool = False,
                   quota_source: str = "drawn", record_timings: bool = False) -> SweepResult:
    """Biased training sets over the slice mode, one group per experiment number.

    With fix_quotas the quotas are drawn once per experiment number and only the
    cells picked inside each slice change between iterations.
    """
    _check_common(methods, iterations)
    if not e_nums:
        raise ConfigError("e_nums must not be empty")
    if quota_source not in QUOTA_SOURCES:
        raise ConfigError(f"quota_source must be one of {QUOTA_SOURCES}, got {quota_source!r}")
    n_slices = space.dims[space.slice_mode]

    def make_trial(e_num: int, iteration: int, inner_jobs: int) -> Trial:
        seed = trial_seed(base_seed, e_num, iteration)
        quota_seed = derive_seed(base_seed, e_num, "quotas") if fix_quotas else seed
        plan = bias_plan(e_num, quota_seed, n_slices, quota_source)
        chosen = biased_sample(dataset.indices, space.slice_mode, plan.quotas, seed)
        trial = run_trial(dataset, space, methods, chosen, e_num, iteration, seed, inner_jobs, record_timings)
        trial.quotas = plan.quotas
        return trial

    pairs = [(int(e), it) for e in e_nums for it in range(int(iterations))]
    trials = _run_trials(pairs, make_trial, jobs, "bias")
    return SweepResult(aggregate(trials, methods), trials)
