"""Two-proportion z-test for equal acceptance probabilities across two groups."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .cohort import CohortTable
from .errors import DataError, DegenerateVarianceError
from .kernels import Probability, as_probability, normal_quantile, phi_lower, phi_upper


class Sidedness(str, Enum):
    TWO_SIDED = "two-sided"
    PROTECTED_LOWER = "one-sided-protected-lower"
    PROTECTED_HIGHER = "one-sided-protected-higher"


class Variance(str, Enum):
    POOLED = "pooled"
    UNPOOLED = "unpooled"


@dataclass(frozen=True)
class TestConfig:
    """Significance level and form of the test.

    ``alpha`` has no default: the tolerated rate of false alarms is a
    normative choice of the caller.
    """

    __test__ = False  # not a pytest class

    alpha: float
    sidedness: Sidedness = Sidedness.TWO_SIDED
    variance: Variance = Variance.POOLED

    def __post_init__(self) -> None:
        alpha = float(as_probability(self.alpha, "alpha"))
        if not 0.0 < alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sidedness", Sidedness(self.sidedness))
        object.__setattr__(self, "variance", Variance(self.variance))

    @property
    def tail_alpha(self) -> float:
        """Probability mass in each rejection tail."""
        return self.alpha / 2 if self.sidedness is Sidedness.TWO_SIDED else self.alpha

    @property
    def critical_value(self) -> float:
        a = self.tail_alpha
        return normal_quantile(Probability(1.0 - a, a))

    def with_alpha(self, alpha: float) -> "TestConfig":
        return TestConfig(alpha, self.sidedness, self.variance)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "sidedness": self.sidedness.value, "variance": self.variance.value}


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    z: float
    p_value: float
    critical_value: float
    reject: bool
    standard_error: float
    observed_disparity: float

    def as_dict(self) -> dict:
        return {
            "z": self.z,
            "p_value": self.p_value,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "standard_error": self.standard_error,
            "observed_disparity": self.observed_disparity,
        }


def _statistic(k_ref, n_ref, k_prot, n_prot, variance: Variance):
    """Disparity, standard error and z for arrays of 2x2 tables.

    z is NaN wherever the standard error is zero.
    """
    k_ref = np.asarray(k_ref, dtype=float)
    k_prot = np.asarray(k_prot, dtype=float)
    n_ref = np.asarray(n_ref, dtype=float)
    n_prot = np.asarray(n_prot, dtype=float)
    p_ref = k_ref / n_ref
    p_prot = k_prot / n_prot
    disparity = p_ref - p_prot
    if variance is Variance.POOLED:
        pooled = (k_ref + k_prot) / (n_ref + n_prot)
        se = np.sqrt(pooled * (1.0 - pooled) * (1.0 / n_ref + 1.0 / n_prot))
    else:
        se = np.sqrt(p_ref * (1.0 - p_ref) / n_ref + p_prot * (1.0 - p_prot) / n_prot)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0.0, disparity / se, np.nan)
    return disparity, se, z


def _p_value(z, sidedness: Sidedness):
    if sidedness is Sidedness.TWO_SIDED:
        return np.minimum(1.0, 2.0 * phi_upper(np.abs(z)))
    if sidedness is Sidedness.PROTECTED_LOWER:
        return phi_upper(z)
    return phi_lower(z)


def rejections(k_ref, n_ref, k_prot, n_prot, config: TestConfig) -> np.ndarray:
    """Boolean array: does the test reject for each table?

    Tables with zero standard error count as non-rejections. This is the
    exact rule :func:`z_test` applies, evaluated element-wise.
    """
    _, _, z = _statistic(k_ref, n_ref, k_prot, n_prot, config.variance)
    with np.errstate(invalid="ignore"):
        p = _p_value(z, config.sidedness)
        return np.asarray(p < config.alpha)


def z_test(table: CohortTable, config: TestConfig) -> TestResult:
    """Test H0: both designated groups share one acceptance probability.

    Raises :class:`DegenerateVarianceError` when the standard error is zero
    (for pooled variance: every outcome in both groups identical). That case
    means the test cannot be run, not that parity holds.
    """
    ref, prot = table.ref, table.prot
    disparity, se, z = _statistic(ref.k, ref.n, prot.k, prot.n, config.variance)
    if not se > 0.0:
        raise DegenerateVarianceError(
            f"standard error is zero for groups {ref.group!r} ({ref.k}/{ref.n}) and "
            f"{prot.group!r} ({prot.k}/{prot.n}); the {config.variance.value} z-test is undefined"
        )
    p = float(_p_value(z, config.sidedness))
    return TestResult(
        z=float(z),
        p_value=p,
        critical_value=config.critical_value,
        reject=p < config.alpha,
        standard_error=float(se),
        observed_disparity=float(disparity),
    )


def chi_square_statistic(table: CohortTable) -> float:
    """Pearson chi-square of the group x outcome 2x2 table, no continuity correction."""
    if table.reference is not None:
        a, b = table.ref, table.prot
    elif len(table.groups) == 2:
        a, b = table.groups
    else:
        raise DataError("chi-square needs a designated pair or exactly two groups")
    observed = np.array([[a.k, a.n - a.k], [b.k, b.n - b.k]], dtype=float)
    rows = observed.sum(axis=1)
    cols = observed.sum(axis=0)
    total = rows.sum()
    if np.any(cols == 0):
        raise DegenerateVarianceError(
            "chi-square is undefined: every outcome in the table is identical"
        )
    expected = np.outer(rows, cols) / total
    return float(np.sum((observed - expected) ** 2 / expected))
