"""Bootstrap intervals, Welch t-tests and FINDER rubric aggregation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import EvaluationError

DEFAULT_RESAMPLES = 1000
DEFAULT_CI_LEVEL = 0.95
# keeps one resample block at about a million indices
_BLOCK_CELLS = 1 << 20


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    lower: float
    upper: float
    stderr: float

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2

    def __iter__(self):
        return iter((self.mean, self.lower, self.upper, self.stderr))


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    level: float = DEFAULT_CI_LEVEL,
    seed: int = 0,
) -> BootstrapResult:
    """Percentile bootstrap of the mean.

    ``stderr`` is the standard deviation (ddof=1) of the resample means.
    Constant input short-circuits to ``(v, v, v, 0)``.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EvaluationError("EMPTY_INPUT", "bootstrap needs at least one value")
    if resamples < 1:
        raise EvaluationError("BAD_RESAMPLES", "resamples must be >= 1")
    if not 0 < level < 1:
        raise EvaluationError("BAD_LEVEL", "level must lie in (0, 1)")
    mean = math.fsum(arr.tolist()) / arr.size
    if np.all(arr == arr[0]):
        v = float(arr[0])
        return BootstrapResult(v, v, v, 0.0)
    rng = np.random.default_rng(seed)
    n = arr.size
    block = max(1, _BLOCK_CELLS // n)
    means = np.empty(resamples)
    for start in range(0, resamples, block):
        rows = min(block, resamples - start)
        idx = rng.integers(0, n, size=(rows, n))
        means[start:start + rows] = arr[idx].mean(axis=1)
    alpha = (1 - level) / 2
    lower, upper = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    stderr = float(means.std(ddof=1)) if resamples > 1 else 0.0
    return BootstrapResult(mean, float(lower), float(upper), stderr)


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    df: float
    degenerate: bool = False

    def __iter__(self):
        return iter((self.statistic, self.pvalue))


def _mean_var(x: Sequence[float]) -> tuple[float, float]:
    vals = [float(v) for v in x]
    m = math.fsum(vals) / len(vals)
    return m, math.fsum((v - m) ** 2 for v in vals) / (len(vals) - 1)


def compare_groups(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Welch two-sample t-test, two-sided."""
    if len(a) < 2 or len(b) < 2:
        raise EvaluationError("DEGENERATE_VARIANCE", "each group needs at least two observations")
    ma, va = _mean_var(a)
    mb, vb = _mean_var(b)
    sa, sb = va / len(a), vb / len(b)
    if sa + sb == 0:
        raise EvaluationError("DEGENERATE_VARIANCE", "both groups have zero variance", mean_a=ma, mean_b=mb)
    t = (ma - mb) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    p = 1.0 if t == 0 else min(1.0, 2 * float(sps.t.sf(abs(t), df)))
    return TTestResult(t, p, df)


def compare_groups_lenient(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """compare_groups, with a fixed answer when both groups have zero variance.

    Equal constant groups give ``t = 0, p = 1``; different constants give
    ``t = +/-inf, p = 0``. The result is flagged ``degenerate``.
    """
    try:
        return compare_groups(a, b)
    except EvaluationError as exc:
        if "mean_a" not in exc.details:
            raise
        ma, mb = exc.details["mean_a"], exc.details["mean_b"]
        if ma == mb:
            return TTestResult(0.0, 1.0, math.nan, True)
        return TTestResult(math.copysign(math.inf, ma - mb), 0.0, math.nan, True)


# ---------------------------------------------------------------------------
# FINDER rubric


class FinderDimension(str, Enum):
    CASE_COMPREHENSION = "CASE_COMPREHENSION"
    GUIDELINE_COMPLIANCE = "GUIDELINE_COMPLIANCE"
    KEY_FEATURE_SENSITIVITY = "KEY_FEATURE_SENSITIVITY"
    REASONING_CONSISTENCY = "REASONING_CONSISTENCY"
    DIFFERENTIAL_RELEVANCE = "DIFFERENTIAL_RELEVANCE"
    DIAGNOSTIC_ACCEPTABILITY = "DIAGNOSTIC_ACCEPTABILITY"
    BIAS_FAIRNESS = "BIAS_FAIRNESS"
    HARM_POTENTIAL = "HARM_POTENTIAL"


@dataclass(frozen=True)
class FinderScorecard:
    case_id: str
    model_tag: str
    rater_id: str
    scores: Mapping[FinderDimension, int]

    def __post_init__(self) -> None:
        scores = {}
        for k, v in self.scores.items():
            try:
                scores[FinderDimension(k)] = v
            except ValueError:
                raise EvaluationError("INCOMPLETE_SCORECARD", f"unknown dimension {k!r}") from None
        missing = [d.value for d in FinderDimension if d not in scores]
        if missing:
            raise EvaluationError(
                "INCOMPLETE_SCORECARD", f"card {self.case_id}/{self.model_tag} lacks {', '.join(missing)}"
            )
        for d, v in scores.items():
            if isinstance(v, bool) or not isinstance(v, int) or not 1 <= v <= 5:
                raise EvaluationError("BAD_SCORE", f"{d.value} score {v!r} is not an integer in 1..5")
        object.__setattr__(self, "scores", {d: scores[d] for d in FinderDimension})

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FinderScorecard":
        try:
            return cls(str(doc["case_id"]), str(doc["model_tag"]), str(doc.get("rater_id", "")), dict(doc["scores"]))
        except KeyError as exc:
            raise EvaluationError("INCOMPLETE_SCORECARD", f"scorecard lacks {exc.args[0]!r}") from None


@dataclass(frozen=True)
class DimensionSummary:
    mean: float
    lower: float
    upper: float
    half_width: float
    n: int
    single_observation: bool


@dataclass(frozen=True)
class FinderSummary:
    dimensions: Mapping[str, Mapping[FinderDimension, DimensionSummary]]
    comparisons: Mapping[tuple[str, str], Mapping[FinderDimension, TTestResult]]

    def to_dict(self) -> dict:
        return {
            "dimensions": {
                m: {d.value: vars(s) for d, s in dims.items()} for m, dims in self.dimensions.items()
            },
            "comparisons": [
                {"a": a, "b": b, "by_dimension": {
                    d.value: {"t": r.statistic, "p": r.pvalue, "df": r.df, "degenerate": r.degenerate}
                    for d, r in res.items()
                }}
                for (a, b), res in self.comparisons.items()
            ],
        }


def t_interval(values: Sequence[float], level: float = DEFAULT_CI_LEVEL) -> DimensionSummary:
    """Mean with a Student-t interval. One observation gives half-width 0, flagged."""
    n = len(values)
    if n == 0:
        raise EvaluationError("EMPTY_INPUT", "no values")
    if n == 1:
        v = float(values[0])
        return DimensionSummary(v, v, v, 0.0, 1, True)
    m, var = _mean_var(values)
    half = float(sps.t.ppf((1 + level) / 2, n - 1)) * math.sqrt(var / n)
    return DimensionSummary(m, m - half, m + half, half, n, False)


def aggregate_finder(
    cards: Sequence[FinderScorecard], level: float = DEFAULT_CI_LEVEL, models: Optional[Sequence[str]] = None
) -> FinderSummary:
    """Per-model, per-dimension mean and t interval, plus pairwise Welch tests.

    Pairs of models whose scores are constant on a dimension get the degenerate
    answer from :func:`compare_groups_lenient`. Pairs where a model has a single
    card are skipped for that dimension.
    """
    if not cards:
        raise EvaluationError("EMPTY_INPUT", "no scorecards")
    grouped: dict[str, list[FinderScorecard]] = {}
    for c in cards:
        grouped.setdefault(c.model_tag, []).append(c)
    order = list(models) if models else sorted(grouped)
    dims = {
        m: {d: t_interval([c.scores[d] for c in grouped[m]], level) for d in FinderDimension} for m in order
    }
    comparisons: dict[tuple[str, str], dict[FinderDimension, TTestResult]] = {}
    for a, b in itertools.combinations(order, 2):
        res = {}
        for d in FinderDimension:
            xa = [c.scores[d] for c in grouped[a]]
            xb = [c.scores[d] for c in grouped[b]]
            if len(xa) >= 2 and len(xb) >= 2:
                res[d] = compare_groups_lenient(xa, xb)
        comparisons[(a, b)] = res
    return FinderSummary(dims, comparisons)
