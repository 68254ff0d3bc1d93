"""Incidence-based cardinality estimators, convergence scoring and completeness.

Both estimators read only the frequency-of-frequencies summary of the
capture data: the number of windows ``K``, the number of distinct entities
seen ``D``, the number of incidences ``n`` and ``f[k]``, the number of
entities captured in exactly ``k`` windows.

``J1``
    First-order jackknife, ``D + f1 * (K - 1) / K``.
``N1``
    Coverage estimator under uniform capture probability, ``D / C`` with
    sample coverage ``C = 1 - f1 / n``.
"""

from __future__ import annotations

import math
import statistics
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .validation import check_incidence_matrix, check_trailing_fraction
from .windowing import IncidenceSummary, Stratum

J1 = "J1"
N1 = "N1"
ESTIMATOR_IDS = (N1, J1)

DEFAULT_TRAILING_FRACTION = 0.2


class EstimationError(ValueError):
    pass


class NoEvidenceError(EstimationError):
    """Nothing was captured, so no estimate can be formed."""


class NoScoreError(EstimationError):
    """Too few defined estimates to score convergence."""


class UndefinedEstimateError(EstimationError):
    """Completeness was requested for an estimate that is not defined."""


@dataclass(frozen=True)
class FreqStats:
    K: int
    D: int
    n: int
    f: dict[int, int] = field(default_factory=dict)

    @property
    def f1(self) -> int:
        return self.f.get(1, 0)

    @property
    def f2(self) -> int:
        return self.f.get(2, 0)

    def check(self) -> None:
        if any(v < 0 for v in self.f.values()):
            raise ValueError("negative frequency count")
        if sum(self.f.values()) != self.D:
            raise ValueError("sum of f_k differs from D")
        if sum(k * v for k, v in self.f.items()) != self.n:
            raise ValueError("sum of k * f_k differs from n")
        if any(k > self.K or k < 1 for k, v in self.f.items() if v):
            raise ValueError("f_k nonzero outside 1..K")


def frequency_stats(inc: IncidenceSummary) -> FreqStats:
    """Frequency-of-frequencies of the number of windows each entity appears in."""
    hist = Counter(inc.capture_counts().values())
    return FreqStats(K=inc.K, D=inc.D, n=inc.n, f=dict(sorted(hist.items())))


def frequency_stats_from_matrix(X) -> FreqStats:
    """Same as :func:`frequency_stats` for a 0/1 entities-by-windows matrix."""
    X = check_incidence_matrix(X)
    per_entity = X.sum(axis=1)
    per_entity = per_entity[per_entity > 0]
    values, counts = np.unique(per_entity, return_counts=True)
    return FreqStats(
        K=X.shape[1],
        D=int(per_entity.size),
        n=int(per_entity.sum()),
        f={int(k): int(c) for k, c in zip(values, counts)},
    )


@dataclass(frozen=True)
class Estimate:
    estimator_id: str
    value: float | None
    defined: bool
    K_used: int
    D: int
    stratum: Stratum | None = None
    reason: str = ""


def estimate_jack1(fs: FreqStats, stratum: Stratum | None = None) -> Estimate:
    if fs.D == 0:
        raise NoEvidenceError("no entity captured; J1 needs D >= 1")
    value = fs.D + fs.f1 * (fs.K - 1) / fs.K
    return Estimate(J1, float(value), True, fs.K, fs.D, stratum)


def estimate_n1_unif(fs: FreqStats, stratum: Stratum | None = None) -> Estimate:
    if fs.n == 0:
        raise NoEvidenceError("no incidences; N1 needs n >= 1")
    if fs.f1 == fs.n:
        return Estimate(N1, None, False, fs.K, fs.D, stratum, "insufficient recapture evidence")
    # D / (1 - f1/n), rearranged to keep exact cases exact in floating point
    return Estimate(N1, fs.D * fs.n / (fs.n - fs.f1), True, fs.K, fs.D, stratum)


ESTIMATORS: dict[str, Callable[..., Estimate]] = {J1: estimate_jack1, N1: estimate_n1_unif}


def get_estimator(estimator_id: str) -> Callable[..., Estimate]:
    try:
        return ESTIMATORS[estimator_id]
    except KeyError:
        raise ValueError(f"unknown estimator {estimator_id!r}; expected one of {sorted(ESTIMATORS)}") from None


def estimate(fs: FreqStats, estimator_id: str, stratum: Stratum | None = None) -> Estimate:
    return get_estimator(estimator_id)(fs, stratum)


def _value_or_none(fs: FreqStats, estimator_id: str) -> float | None:
    try:
        est = estimate(fs, estimator_id)
    except NoEvidenceError:
        return None
    return est.value if est.defined else None


def frequency_stats_series(summaries: Sequence[IncidenceSummary]) -> list[FreqStats]:
    """:func:`frequency_stats` of each summary.

    Consecutive summaries that extend the previous one window by window (as
    produced by cumulative binning) are updated incrementally instead of
    being recounted.
    """
    out: list[FreqStats] = []
    counts: dict = {}
    hist: Counter = Counter()
    prev: tuple = ()
    D = n = 0
    for inc in summaries:
        cs = inc.capture_sets
        extends = len(cs) >= len(prev) and all(a is b for a, b in zip(cs, prev))
        if not extends:
            counts, hist, prev, D, n = {}, Counter(), (), 0, 0
        for s in cs[len(prev):]:
            for e in s:
                c = counts.get(e, 0)
                if c:
                    hist[c] -= 1
                else:
                    D += 1
                counts[e] = c + 1
                hist[c + 1] += 1
            n += len(s)
        prev = cs
        out.append(FreqStats(K=len(cs), D=D, n=n, f={k: v for k, v in sorted(hist.items()) if v}))
    return out


def estimate_series(summaries: Sequence[IncidenceSummary], estimator_id: str) -> list[float | None]:
    """Estimate after each accumulated window; ``None`` where undefined."""
    get_estimator(estimator_id)
    return [_value_or_none(fs, estimator_id) for fs in frequency_stats_series(summaries)]


@dataclass(frozen=True)
class ConvergenceScore:
    value: float
    trailing_fraction: float
    points: int


def _trailing_length(length: int, q: float) -> int:
    # guard against q * length landing a hair above an integer (0.1 * 30)
    return max(1, math.ceil(round(q * length, 9)))


def convergence_score(series: Sequence[float | None], trailing_fraction: float = DEFAULT_TRAILING_FRACTION) -> ConvergenceScore:
    """Coefficient of variation of the trailing part of an estimate series.

    The trailing part is the last ``ceil(q * len(series))`` elements; the
    population standard deviation and mean are taken over its defined values.
    Lower is more converged and a constant tail scores exactly 0.
    """
    q = check_trailing_fraction(trailing_fraction)
    if not series:
        raise NoScoreError("empty series")
    tail = [float(v) for v in series[-_trailing_length(len(series), q):] if v is not None]
    if len(tail) < 2:
        raise NoScoreError(f"{len(tail)} defined point(s) in the trailing segment; need at least 2")
    mean = statistics.fmean(tail)
    if not mean > 0:
        raise NoScoreError("trailing mean is not positive")
    # pstdev works in exact rationals, so a constant tail gives exactly 0.0
    return ConvergenceScore(statistics.pstdev(tail) / mean, q, len(tail))


@dataclass(frozen=True)
class Completeness:
    value: float
    clamped: bool


def completeness(observed_count: int, est: Estimate | float) -> Completeness:
    """Observed count over estimated cardinality, clamped to at most 1."""
    if isinstance(est, Estimate):
        if not est.defined or est.value is None:
            raise UndefinedEstimateError(f"estimate {est.estimator_id} is undefined: {est.reason}")
        value = est.value
    else:
        value = float(est)
    if observed_count < 0:
        raise ValueError("observed count must be non-negative")
    if not value > 0:
        raise UndefinedEstimateError("estimated cardinality must be positive")
    ratio = observed_count / value
    if ratio > 1.0:
        return Completeness(1.0, True)
    return Completeness(ratio, False)


class CardinalityEstimator(BaseEstimator):
    """Population size from a capture-incidence matrix, scikit-learn style.

    Parameters
    ----------
    estimator : {"J1", "N1"}, default="J1"
    trailing_fraction : float, default=0.2
        Share of the cumulative estimate series scored for convergence.

    Attributes
    ----------
    freq_stats_ : FreqStats
    estimate_ : Estimate
        Estimate over all windows; ``estimate_.value`` is ``None`` if undefined.
    series_ : list of float or None
        Estimate after windows ``1..t`` for each ``t``.
    convergence_ : ConvergenceScore or None
    """

    def __init__(self, estimator=J1, trailing_fraction=DEFAULT_TRAILING_FRACTION):
        self.estimator = estimator
        self.trailing_fraction = trailing_fraction

    def fit(self, X, y=None):
        """Fit on a 0/1 matrix (entities x windows) or an :class:`IncidenceSummary`."""
        get_estimator(self.estimator)
        check_trailing_fraction(self.trailing_fraction)
        if isinstance(X, IncidenceSummary):
            from .windowing import prefix_summaries

            prefixes = prefix_summaries(X)
            stats = frequency_stats_series(prefixes)
            stratum = X.stratum
        else:
            X = check_incidence_matrix(X)
            stats = _matrix_stats_series(X)
            stratum = None
        if not stats or stats[-1].D == 0:
            raise NoEvidenceError("incidence data contains no captures")
        self.freq_stats_ = stats[-1]
        self.n_windows_ = self.freq_stats_.K
        self.estimate_ = estimate(self.freq_stats_, self.estimator, stratum)
        self.series_ = [_value_or_none(fs, self.estimator) for fs in stats]
        try:
            self.convergence_ = convergence_score(self.series_, self.trailing_fraction)
        except NoScoreError:
            self.convergence_ = None
        return self

    def completeness(self, observed_count: int) -> Completeness:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "estimate_")
        return completeness(observed_count, self.estimate_)


def _matrix_stats_series(X: np.ndarray) -> list[FreqStats]:
    cum = np.cumsum(X, axis=1, dtype=np.int64)
    out = []
    for t in range(X.shape[1]):
        col = cum[:, t]
        seen = col[col > 0]
        values, counts = np.unique(seen, return_counts=True)
        out.append(FreqStats(t + 1, int(seen.size), int(seen.sum()), {int(k): int(c) for k, c in zip(values, counts)}))
    return out
