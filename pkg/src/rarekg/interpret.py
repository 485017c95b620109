"""Linear surrogate fits and non-HPO evidence profiling."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np

from .errors import EvaluationError
from .ontology import OntologyGraph, TermId, map_feature_to_hpo

log = logging.getLogger(__name__)

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class SurrogateFit:
    intercept: float
    coefficients: tuple[tuple[Hashable, float], ...]
    dropped: tuple[Hashable, ...]
    ridge_penalty: Optional[float]
    n_cases: int

    def coefficient_map(self) -> dict:
        return dict(self.coefficients)

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "coefficients": [{"feature": str(k), "coefficient": v} for k, v in self.coefficients],
            "dropped_constant_features": [str(k) for k in self.dropped],
            "ridge_penalty": self.ridge_penalty,
            "n_cases": self.n_cases,
        }


def fit_linear_surrogate(
    features: np.ndarray | Sequence[Sequence[float]],
    response: Sequence[float],
    names: Optional[Sequence[Hashable]] = None,
    ridge: float = DEFAULT_RIDGE,
) -> SurrogateFit:
    """Ordinary least squares with an intercept.

    Constant columns are dropped and reported. If the remaining design is rank
    deficient the fit falls back to ridge regression with penalty ``ridge``
    (intercept unpenalized) and the penalty is reported.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise EvaluationError("SHAPE_MISMATCH", f"features {X.shape} vs response {y.shape}")
    if X.shape[0] < 2:
        raise EvaluationError("INSUFFICIENT_CASES", "surrogate fit needs at least two cases")
    names = list(names) if names is not None else list(range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise EvaluationError("SHAPE_MISMATCH", "one name per feature column required")
    varying = np.ptp(X, axis=0) > 0 if X.shape[1] else np.zeros(0, dtype=bool)
    dropped = tuple(n for n, keep in zip(names, varying) if not keep)
    kept = [n for n, keep in zip(names, varying) if keep]
    if not kept:
        raise EvaluationError("NO_VARIABLE_FEATURE", "every feature column is constant")
    A = np.column_stack([np.ones(X.shape[0]), X[:, varying]])
    penalty = None
    if np.linalg.matrix_rank(A) == A.shape[1]:
        beta = np.linalg.lstsq(A, y, rcond=None)[0]
    else:
        penalty = ridge
        reg = np.eye(A.shape[1]) * ridge
        reg[0, 0] = 0.0
        beta = np.linalg.solve(A.T @ A + reg, A.T @ y)
        log.info("rank-deficient surrogate design; ridge fallback with penalty %g", ridge)
    coefs = sorted(zip(kept, (float(b) for b in beta[1:])), key=lambda kv: (-abs(kv[1]), str(kv[0])))
    return SurrogateFit(float(beta[0]), tuple(coefs), dropped, penalty, int(X.shape[0]))


def fit_global_surrogate(
    phenotype_sets: Sequence[Iterable[TermId]],
    predictions: Sequence[Optional[TermId]],
    target_disease: TermId,
    ridge: float = DEFAULT_RIDGE,
) -> SurrogateFit:
    """Regress "model predicted ``target_disease``" on per-case phenotype indicators."""
    if len(phenotype_sets) != len(predictions):
        raise EvaluationError("SHAPE_MISMATCH", "one prediction per case required")
    sets = [frozenset(s) for s in phenotype_sets]
    terms = sorted(set().union(*sets)) if sets else []
    X = np.array([[1.0 if t in s else 0.0 for t in terms] for s in sets]).reshape(len(sets), len(terms))
    y = np.array([1.0 if p == target_disease else 0.0 for p in predictions])
    return fit_linear_surrogate(X, y, terms, ridge)


# ---------------------------------------------------------------------------
# evidence


@dataclass(frozen=True)
class EvidenceProfile:
    case_id: str
    hpo_features: tuple[tuple[str, TermId], ...]
    non_hpo_features: tuple[tuple[str, Optional[str]], ...]

    @property
    def non_hpo_fraction(self) -> float:
        return len(self.non_hpo_features) / (len(self.hpo_features) + len(self.non_hpo_features))

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "hpo_features": [{"text": t, "hpo": str(h)} for t, h in self.hpo_features],
            "non_hpo_features": [{"text": t, "category": c} for t, c in self.non_hpo_features],
            "non_hpo_fraction": self.non_hpo_fraction,
        }


def profile_evidence(
    graph: OntologyGraph,
    features: Sequence[str],
    case_id: str = "",
    categorize: Optional[Callable[[str], Optional[str]]] = None,
) -> EvidenceProfile:
    """Split extracted features into HPO-mappable and non-phenotypic ones.

    Blank features are ignored. ``categorize`` may tag the non-HPO features
    (for example "lab" or "imaging").
    """
    texts = [f for f in features if f and f.strip()]
    if not texts:
        raise EvaluationError("EMPTY_FEATURES", f"case {case_id!r} has no features")
    hpo, other = [], []
    for text in texts:
        hit = map_feature_to_hpo(graph, text)
        if hit is None:
            other.append((text, categorize(text) if categorize else None))
        else:
            hpo.append((text, hit))
    return EvidenceProfile(case_id, tuple(hpo), tuple(other))


@dataclass(frozen=True)
class FractionSummary:
    median: float
    q1: float
    q3: float
    n: int

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    def to_dict(self) -> dict:
        return {"n": self.n, "median": self.median, "q1": self.q1, "q3": self.q3, "iqr": self.iqr}


def summarize_fractions(fractions: Sequence[float]) -> FractionSummary:
    """Median and quartiles by linear interpolation between order statistics
    (numpy's default ``linear`` quantile rule)."""
    arr = np.asarray(fractions, dtype=float)
    if arr.size == 0:
        raise EvaluationError("EMPTY_INPUT", "no fractions to summarize")
    q1, med, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
    return FractionSummary(float(med), float(q1), float(q3), int(arr.size))
