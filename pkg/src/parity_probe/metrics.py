"""Group fairness point estimates on a designated two-group cohort.

Rates are formed as exact fractions and rounded once, so a difference is zero
exactly when the two groups' rates are equal as rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .cohort import CohortTable, GroupOutcomeCounts
from .errors import DataError, UndefinedRatioError


class MetricId(str, Enum):
    DP_DIFFERENCE = "dp-difference"
    DP_RATIO = "dp-ratio"
    EO_TPR_GAP = "eo-tpr-gap"
    EO_FPR_GAP = "eo-fpr-gap"


@dataclass(frozen=True)
class MetricValue:
    metric_id: MetricId
    value: float
    protected_rate: float
    reference_rate: float

    def __post_init__(self) -> None:
        for name in ("protected_rate", "reference_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {rate}")
        if self.metric_id is MetricId.DP_RATIO:
            if self.value < 0:
                raise DataError(f"dp-ratio must be non-negative, got {self.value}")
        elif not -1.0 <= self.value <= 1.0:
            raise DataError(f"{self.metric_id.value} must lie in [-1, 1], got {self.value}")

    def as_dict(self) -> dict:
        return {
            "metric": self.metric_id.value,
            "value": self.value,
            "protected_rate": self.protected_rate,
            "reference_rate": self.reference_rate,
        }


def _rate(g: GroupOutcomeCounts) -> Fraction:
    return Fraction(g.k, g.n)


def _difference(metric_id: MetricId, ref: GroupOutcomeCounts, prot: GroupOutcomeCounts) -> MetricValue:
    r_ref, r_prot = _rate(ref), _rate(prot)
    return MetricValue(metric_id, float(r_ref - r_prot), float(r_prot), float(r_ref))


def dp_difference(table: CohortTable) -> MetricValue:
    """Reference acceptance rate minus protected acceptance rate."""
    return _difference(MetricId.DP_DIFFERENCE, table.ref, table.prot)


def dp_ratio(table: CohortTable) -> MetricValue:
    """Protected acceptance rate divided by reference acceptance rate."""
    r_ref, r_prot = _rate(table.ref), _rate(table.prot)
    if r_ref == 0:
        raise UndefinedRatioError(
            f"reference group {table.reference!r} has acceptance rate 0; the ratio is undefined"
        )
    return MetricValue(MetricId.DP_RATIO, float(r_prot / r_ref), float(r_prot), float(r_ref))


def eo_gaps(table: CohortTable) -> tuple[MetricValue, MetricValue]:
    """Signed true-positive-rate and false-positive-rate gaps (reference minus protected)."""
    ref, prot = table.ref, table.prot
    for g in (ref, prot):
        if not g.has_strata:
            raise DataError(f"group {g.group!r} has no ground-truth labels; equalized odds needs them")
    tpr = _difference(MetricId.EO_TPR_GAP, ref.stratum(1), prot.stratum(1))
    fpr = _difference(MetricId.EO_FPR_GAP, ref.stratum(0), prot.stratum(0))
    return tpr, fpr
