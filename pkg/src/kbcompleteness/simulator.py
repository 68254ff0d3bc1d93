"""Synthetic populations with known size, for checking the estimators.

Random numbers come from numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence(seed)``. For a population spec the draws are, in
order: per-entity capture probabilities (power-law mode only, ``N`` uniform
variates), then a ``K x N`` block of uniform variates consumed window by
window. Entity ``i`` is captured in window ``w`` when its variate is below
its probability. Because windows are drawn in order, the first ``k`` windows
of a spec with ``K > k`` equal the whole of the same spec with ``K = k``.

Trial ``i`` of an evaluation uses the seed
``SeedSequence(seed).spawn(trials)[i].generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import math
from datetime import datetime, timedelta
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import (
    DEFAULT_TRAILING_FRACTION,
    NoScoreError,
    _matrix_stats_series,
    _value_or_none,
    convergence_score,
    get_estimator,
)
from .windowing import IncidenceSummary, Stratum

SYNTHETIC_STRATUM = Stratum("synthetic")


@dataclass(frozen=True)
class Uniform:
    p: float

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"capture probability must lie in (0, 1], got {self.p}")

    def draw(self, N: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(N, self.p)


@dataclass(frozen=True)
class PowerLaw:
    """Capture probabilities with density proportional to ``p ** -alpha`` on ``[p_min, p_max]``."""

    alpha: float
    p_min: float
    p_max: float

    def __post_init__(self):
        if not 0.0 < self.p_min <= self.p_max <= 1.0:
            raise ValueError("need 0 < p_min <= p_max <= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")

    def draw(self, N: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(N)
        a, lo, hi = self.alpha, self.p_min, self.p_max
        if lo == hi:
            return np.full(N, lo)
        if math.isclose(a, 1.0):
            return lo * (hi / lo) ** u
        e = 1.0 - a
        return (lo**e + u * (hi**e - lo**e)) ** (1.0 / e)


@dataclass(frozen=True)
class PopulationSpec:
    N: int
    distribution: Uniform | PowerLaw
    K: int
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def trial_seeds(seed: int, trials: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(trials)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def simulate_matrix(spec: PopulationSpec) -> np.ndarray:
    """0/1 capture matrix of shape ``(N, K)``; rows are entities 0..N-1."""
    rng = make_rng(spec.seed)
    p = spec.distribution.draw(spec.N, rng)
    u = rng.random((spec.K, spec.N))
    return (u < p).T.astype(np.int8)


def simulate_incidence(spec: PopulationSpec) -> IncidenceSummary:
    X = simulate_matrix(spec)
    sets = [frozenset(np.flatnonzero(X[:, w]).tolist()) for w in range(spec.K)]
    return IncidenceSummary.from_capture_sets(SYNTHETIC_STRATUM, sets)


@dataclass(frozen=True)
class TrialResult:
    spec: PopulationSpec
    estimator_id: str
    series: list[float | None] = field(repr=False)
    D_final: int
    estimate: float | None
    relative_error: float | None
    convergence: float | None


def run_trial(spec: PopulationSpec, estimator_id: str, trailing_fraction: float = DEFAULT_TRAILING_FRACTION) -> TrialResult:
    get_estimator(estimator_id)
    stats = _matrix_stats_series(simulate_matrix(spec))
    series = [_value_or_none(fs, estimator_id) for fs in stats]
    final = series[-1]
    try:
        conv = convergence_score(series, trailing_fraction).value
    except NoScoreError:
        conv = None
    rel = (final - spec.N) / spec.N if final is not None else None
    return TrialResult(spec, estimator_id, series, stats[-1].D, final, rel, conv)


@dataclass(frozen=True)
class EvaluationSummary:
    estimator_id: str
    trials: int
    median_relative_error: float | None
    median_abs_relative_error: float | None
    relative_error_quantiles: dict[float, float]
    median_convergence: float | None
    undefined_rate: float
    results: list[TrialResult] = field(repr=False)


QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def evaluate_estimator(spec: PopulationSpec, estimator_id: str, trials: int, trailing_fraction: float = DEFAULT_TRAILING_FRACTION) -> EvaluationSummary:
    """Run ``trials`` independent replicates of ``spec`` and summarise the error."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    results = [run_trial(replace(spec, seed=s), estimator_id, trailing_fraction) for s in trial_seeds(spec.seed, trials)]
    errs = np.array([r.relative_error for r in results if r.relative_error is not None])
    convs = [r.convergence for r in results if r.convergence is not None]
    return EvaluationSummary(
        estimator_id=estimator_id,
        trials=trials,
        median_relative_error=float(np.median(errs)) if errs.size else None,
        median_abs_relative_error=float(np.median(np.abs(errs))) if errs.size else None,
        relative_error_quantiles={q: float(np.quantile(errs, q)) for q in QUANTILES} if errs.size else {},
        median_convergence=float(np.median(convs)) if convs else None,
        undefined_rate=1.0 - errs.size / trials,
        results=results,
    )


@dataclass(frozen=True)
class BurstStreamSpec:
    """Edit-stream generator with week-scale recapture.

    Every entity receives a burst of edits at a random instant within the
    first ``onset_days`` of the period and a follow-up burst ``follow_up_days``
    to ``follow_up_days + follow_up_jitter_days`` later, so at one-week
    resolution each entity is seen in at least two windows. On top of that,
    sporadic single edits arrive as a Poisson process of
    ``background_per_week`` edits per entity per week over the whole period.
    """

    stratum_sizes: tuple[tuple[str, str, int], ...]
    period_start: datetime
    period_end: datetime
    onset_days: float = 365.0
    follow_up_days: float = 7.0
    follow_up_jitter_days: float = 3.0
    max_burst_edits: int = 4
    background_per_week: float = 0.01
    seed: int = 0


def simulate_edit_stream(spec: BurstStreamSpec):
    """Registry and edit records drawn from ``spec``.

    Returns ``(registry, records)``; records are in dataset order.
    """
    from .dataset import EditRecord, EntityRegistry, GenderLabel, RegistryEntry, sort_edits

    rng = make_rng(spec.seed)
    period = (spec.period_end - spec.period_start).total_seconds()
    entries = []
    records = []
    rev = 1
    for class_id, gender, size in spec.stratum_sizes:
        for i in range(size):
            entity_id = f"{class_id}_{gender}_{i:05d}"
            entries.append(RegistryEntry(entity_id, entity_id.replace("_", " "), (class_id,), GenderLabel(gender)))
            onset = rng.random() * spec.onset_days * 86400
            gap = (spec.follow_up_days + rng.random() * spec.follow_up_jitter_days) * 86400
            times = []
            for base in (onset, onset + gap):
                k = 1 + int(rng.integers(spec.max_burst_edits))
                times.extend(base + rng.random(k) * 3600)
            n_bg = int(rng.poisson(spec.background_per_week * period / (7 * 86400)))
            times.extend(rng.random(n_bg) * period)
            for t in sorted(times):
                if t < period:
                    ts = spec.period_start + timedelta(seconds=int(t))
                    records.append(EditRecord(entity_id, ts, rev, (class_id,)))
                    rev += 1
    return EntityRegistry.from_entries(entries), sort_edits(records)
