"""Type-2 error of the two-proportion z-test.

Three independent routes to the same quantity:

* ``analytic_beta``: normal approximation with the null standard error in the
  critical region and the alternative standard error in the spread.
* ``monte_carlo_beta``: simulate tables, run the test, count misses.
* ``exact_beta``: enumerate every outcome pair of two binomials.

On top of those sit the inverse solvers (sample size, detectable disparity),
grid sweeps and synthetic cohort generation.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, TextIO

import numpy as np

from .cohort import CohortTable, DecisionRecord, GroupOutcomeCounts
from .errors import SizeGuardError, UnreachableTargetError
from .kernels import (
    RandomSource,
    as_probability,
    binomial_pmf_vector,
    binomial_sample,
    normal_cdf,
)
from .parity import Sidedness, TestConfig, Variance, rejections

EXACT_MAX_N = 500
MC_MIN_REPLICATES = 1000
MC_BLOCK = 1 << 16
_MAX_GROUP_SIZE = 1 << 40


class Method(str, Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte-carlo"
    EXACT = "exact"


@dataclass(frozen=True)
class PowerQuery:
    p_ref: float
    p_prot: float
    n_ref: int
    n_prot: int
    config: TestConfig

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_ref", float(as_probability(self.p_ref, "p_ref")))
        object.__setattr__(self, "p_prot", float(as_probability(self.p_prot, "p_prot")))
        for name in ("n_ref", "n_prot"):
            n = getattr(self, name)
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise ValueError(f"{name} must be a positive integer, got {n!r}")
            object.__setattr__(self, name, int(n))

    @property
    def disparity(self) -> float:
        return self.p_ref - self.p_prot

    def as_dict(self) -> dict:
        return {
            "p_ref": self.p_ref,
            "p_prot": self.p_prot,
            "n_ref": self.n_ref,
            "n_prot": self.n_prot,
            **self.config.as_dict(),
        }


@dataclass(frozen=True)
class PowerEstimate:
    beta: float
    method: Method
    replicates: Optional[int] = None
    std_error: Optional[float] = None
    seed: Optional[int] = None
    stream_id: Optional[int] = None

    @property
    def power(self) -> float:
        return 1.0 - self.beta

    def as_dict(self) -> dict:
        out = {"method": self.method.value, "beta": self.beta, "power": self.power}
        if self.method is Method.MONTE_CARLO:
            out.update(
                replicates=self.replicates,
                std_error=self.std_error,
                seed=self.seed,
                stream_id=self.stream_id,
            )
        return out


# ---------------------------------------------------------------------------
# Analytic
# ---------------------------------------------------------------------------

def analytic_beta(query: PowerQuery) -> PowerEstimate:
    """Normal-approximation type-2 error.

    With disparity d, critical value c, null standard error s0 (pooled at the
    size-weighted mean rate, or the alternative one for the unpooled test) and
    alternative standard error s1, two-sided power is
    ``Phi((d - c*s0)/s1) + Phi((-d - c*s0)/s1)``; one-sided tests keep the
    single term pointing in the tested direction.
    """
    p_ref, p_prot, n_ref, n_prot = query.p_ref, query.p_prot, query.n_ref, query.n_prot
    for name, p in (("p_ref", p_ref), ("p_prot", p_prot)):
        if not 0.0 < p < 1.0:
            raise ValueError(f"analytic_beta needs {name} strictly inside (0, 1), got {p}")
    cfg = query.config
    d = p_ref - p_prot
    se_alt = math.sqrt(p_ref * (1 - p_ref) / n_ref + p_prot * (1 - p_prot) / n_prot)
    if cfg.variance is Variance.POOLED:
        pbar = (n_ref * p_ref + n_prot * p_prot) / (n_ref + n_prot)
        se_null = math.sqrt(pbar * (1 - pbar) * (1 / n_ref + 1 / n_prot))
    else:
        se_null = se_alt
    c = cfg.critical_value
    upper = float(normal_cdf((d - c * se_null) / se_alt))
    lower = float(normal_cdf((-d - c * se_null) / se_alt))
    if cfg.sidedness is Sidedness.TWO_SIDED:
        power = upper + lower
    elif cfg.sidedness is Sidedness.PROTECTED_LOWER:
        power = upper
    else:
        power = lower
    beta = min(1.0, max(0.0, 1.0 - power))
    return PowerEstimate(beta, Method.ANALYTIC)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _block_misses(query: PowerQuery, source: RandomSource, block: int, size: int) -> int:
    gen = source.substream(block).generator()
    k_ref = gen.binomial(query.n_ref, query.p_ref, size=size)
    k_prot = gen.binomial(query.n_prot, query.p_prot, size=size)
    rej = rejections(k_ref, query.n_ref, k_prot, query.n_prot, query.config)
    return int(size - np.count_nonzero(rej))


def monte_carlo_beta(
    query: PowerQuery,
    replicates: int,
    source: RandomSource,
    workers: int = 1,
) -> PowerEstimate:
    """Fraction of simulated tables on which the z-test fails to reject.

    Replicates are drawn in fixed blocks of ``MC_BLOCK``; block ``b`` always
    uses ``source.substream(b)``, so the estimate is the same for any
    ``workers`` count. Tables with zero variance count as misses.
    """
    if replicates < MC_MIN_REPLICATES:
        raise ValueError(f"monte_carlo_beta needs at least {MC_MIN_REPLICATES} replicates")
    sizes = [min(MC_BLOCK, replicates - start) for start in range(0, replicates, MC_BLOCK)]
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            misses = sum(pool.map(lambda b: _block_misses(query, source, b, sizes[b]), range(len(sizes))))
    else:
        misses = sum(_block_misses(query, source, b, s) for b, s in enumerate(sizes))
    beta = misses / replicates
    return PowerEstimate(
        beta,
        Method.MONTE_CARLO,
        replicates=replicates,
        std_error=math.sqrt(beta * (1 - beta) / replicates),
        seed=source.seed,
        stream_id=source.stream_id,
    )


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------

def exact_beta(query: PowerQuery) -> PowerEstimate:
    """Sum the binomial probabilities of every outcome pair the test does not reject."""
    if query.n_ref > EXACT_MAX_N or query.n_prot > EXACT_MAX_N:
        raise SizeGuardError(
            f"exact enumeration is limited to {EXACT_MAX_N} per group, "
            f"got n_ref={query.n_ref}, n_prot={query.n_prot}"
        )
    pmf_ref = binomial_pmf_vector(query.n_ref, query.p_ref)
    pmf_prot = binomial_pmf_vector(query.n_prot, query.p_prot)
    k_ref, k_prot = np.meshgrid(
        np.arange(query.n_ref + 1), np.arange(query.n_prot + 1), indexing="ij"
    )
    keep = ~rejections(k_ref, query.n_ref, k_prot, query.n_prot, query.config)
    mass = np.outer(pmf_ref, pmf_prot)[keep]
    beta = math.fsum(np.sort(mass))
    return PowerEstimate(min(1.0, beta), Method.EXACT)


def estimate_beta(
    query: PowerQuery,
    method: Method = Method.ANALYTIC,
    replicates: int = 100_000,
    source: Optional[RandomSource] = None,
) -> PowerEstimate:
    method = Method(method)
    if method is Method.ANALYTIC:
        return analytic_beta(query)
    if method is Method.EXACT:
        return exact_beta(query)
    if source is None:
        raise ValueError("monte-carlo estimation needs a RandomSource")
    return monte_carlo_beta(query, replicates, source)


# ---------------------------------------------------------------------------
# Inverse solvers
# ---------------------------------------------------------------------------

def _check_target(target_beta: float, config: TestConfig) -> float:
    target = float(as_probability(target_beta, "target_beta"))
    if target <= 0.0:
        raise ValueError("target_beta must be positive")
    if target >= 1.0 - config.alpha:
        raise UnreachableTargetError(
            f"target_beta={target} is not below 1 - alpha = {1.0 - config.alpha}; "
            "no sample size can reach it"
        )
    return target


def _direction_ok(p_ref: float, p_prot: float, sidedness: Sidedness) -> bool:
    if sidedness is Sidedness.PROTECTED_LOWER:
        return p_prot < p_ref
    if sidedness is Sidedness.PROTECTED_HIGHER:
        return p_prot > p_ref
    return p_prot != p_ref


def allocate(step: int, allocation_ratio: Fraction) -> tuple[int, int]:
    """Group sizes for one allocation step of the smaller group.

    ``allocation_ratio`` is ``n_ref / n_prot``; the larger group is rounded up.
    """
    if allocation_ratio >= 1:
        return math.ceil(step * allocation_ratio), step
    return step, math.ceil(step / allocation_ratio)


def _as_ratio(allocation_ratio: float | Fraction) -> Fraction:
    ratio = allocation_ratio if isinstance(allocation_ratio, Fraction) else Fraction(str(allocation_ratio))
    if ratio <= 0:
        raise ValueError(f"allocation ratio must be positive, got {allocation_ratio}")
    return ratio


def min_group_sizes(
    p_ref: float,
    p_prot: float,
    target_beta: float,
    allocation_ratio: float | Fraction,
    config: TestConfig,
) -> tuple[int, int]:
    """Smallest ``(n_ref, n_prot)`` at the given allocation with analytic beta <= target."""
    target = _check_target(target_beta, config)
    ratio = _as_ratio(allocation_ratio)
    if not _direction_ok(p_ref, p_prot, config.sidedness):
        raise UnreachableTargetError(
            f"rates p_ref={p_ref}, p_prot={p_prot} carry no disparity the "
            f"{config.sidedness.value} test can detect"
        )

    def beta_at(step: int) -> float:
        n_ref, n_prot = allocate(step, ratio)
        return analytic_beta(PowerQuery(p_ref, p_prot, n_ref, n_prot, config)).beta

    lo, hi = 0, 1
    while beta_at(hi) > target:
        lo, hi = hi, hi * 2
        if hi > _MAX_GROUP_SIZE:
            raise UnreachableTargetError(
                f"target_beta={target} needs more than {_MAX_GROUP_SIZE} per group"
            )
    # invariant: beta_at(lo) > target (lo == 0 stands for "no data"), beta_at(hi) <= target
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if beta_at(mid) <= target:
            hi = mid
        else:
            lo = mid
    return allocate(hi, ratio)


def min_sample_size(
    p_ref: float,
    p_prot: float,
    target_beta: float,
    allocation_ratio: float | Fraction,
    config: TestConfig,
) -> int:
    """Smallest total sample size (both groups) meeting ``target_beta``."""
    return sum(min_group_sizes(p_ref, p_prot, target_beta, allocation_ratio, config))


DISPARITY_TOL = 1e-6


def min_detectable_disparity(
    base_rate: float,
    n_ref: int,
    n_prot: int,
    target_beta: float,
    config: TestConfig,
) -> float:
    """Smallest disparity ``d`` detectable with analytic beta <= target.

    The reference rate is fixed at ``base_rate``; the protected rate is
    ``base_rate - d`` (``base_rate + d`` for a protected-higher test).
    Bisection stops once the bracket is narrower than ``DISPARITY_TOL``.
    """
    target = _check_target(target_beta, config)
    base = float(as_probability(base_rate, "base_rate"))
    if not 0.0 < base < 1.0:
        raise ValueError(f"base_rate must lie strictly inside (0, 1), got {base}")
    sign = 1.0 if config.sidedness is Sidedness.PROTECTED_HIGHER else -1.0
    span = 1.0 - base if sign > 0 else base

    def beta_at(d: float) -> float:
        return analytic_beta(PowerQuery(base, base + sign * d, n_ref, n_prot, config)).beta

    hi = span * (1.0 - 1e-9)
    if beta_at(hi) > target:
        raise UnreachableTargetError(
            f"no disparity in (0, {span}) reaches target_beta={target} "
            f"with n_ref={n_ref}, n_prot={n_prot}"
        )
    lo = 0.0
    while hi - lo > DISPARITY_TOL:
        mid = 0.5 * (lo + hi)
        if beta_at(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Sweeps and comparisons
# ---------------------------------------------------------------------------

class Axis(str, Enum):
    TOTAL_SAMPLE_SIZE = "total-sample-size"
    PROTECTED_RATE = "protected-rate"


def split_total(total: int, allocation_ratio: float | Fraction) -> tuple[int, int]:
    """Split ``total`` into ``(n_ref, n_prot)`` in the given ratio, keeping the sum."""
    ratio = _as_ratio(allocation_ratio)
    exact = Fraction(total) * ratio / (1 + ratio)
    n_ref = math.floor(exact + Fraction(1, 2))
    n_prot = total - n_ref
    if n_ref < 1 or n_prot < 1:
        raise ValueError(f"total {total} is too small to split in ratio {ratio}")
    return n_ref, n_prot


@dataclass(frozen=True)
class SweepSpec:
    """A grid of power queries along one axis.

    For ``total-sample-size`` the grid holds totals and ``total_n`` is
    ignored; for ``protected-rate`` the grid holds protected rates and
    ``p_prot`` is ignored. Monte Carlo grid point ``i`` uses
    ``source.substream(i)``.
    """

    axis: Axis
    grid: tuple
    p_ref: float
    config: TestConfig
    p_prot: Optional[float] = None
    total_n: Optional[int] = None
    allocation_ratio: Fraction = Fraction(1)
    method: Method = Method.ANALYTIC
    replicates: int = 100_000
    source: Optional[RandomSource] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "allocation_ratio", _as_ratio(self.allocation_ratio))
        grid = tuple(self.grid)
        if not grid:
            raise ValueError("sweep grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.axis is Axis.TOTAL_SAMPLE_SIZE:
            grid = tuple(int(v) for v in grid)
            if self.p_prot is None:
                raise ValueError("a total-sample-size sweep needs p_prot")
        elif self.total_n is None:
            raise ValueError("a protected-rate sweep needs total_n")
        object.__setattr__(self, "grid", grid)
        if self.method is Method.MONTE_CARLO and self.source is None:
            raise ValueError("a monte-carlo sweep needs a RandomSource")

    def query(self, index: int) -> PowerQuery:
        value = self.grid[index]
        if self.axis is Axis.TOTAL_SAMPLE_SIZE:
            n_ref, n_prot = split_total(value, self.allocation_ratio)
            return PowerQuery(self.p_ref, self.p_prot, n_ref, n_prot, self.config)
        n_ref, n_prot = split_total(self.total_n, self.allocation_ratio)
        return PowerQuery(self.p_ref, value, n_ref, n_prot, self.config)


SWEEP_COLUMNS = (
    "axis", "axis_value", "n_ref", "n_prot", "p_ref", "p_prot",
    "alpha", "sidedness", "variance", "method", "beta",
)


@dataclass(frozen=True)
class SweepRow:
    axis: Axis
    axis_value: float
    query: PowerQuery
    method: Method
    beta: float

    def as_csv_row(self) -> list[str]:
        q, cfg = self.query, self.query.config

        def real(x: float) -> str:
            return f"{x:.6g}"

        value = str(self.axis_value) if isinstance(self.axis_value, int) else real(self.axis_value)
        return [
            self.axis.value, value, str(q.n_ref), str(q.n_prot), real(q.p_ref), real(q.p_prot),
            real(cfg.alpha), cfg.sidedness.value, cfg.variance.value, self.method.value,
            real(self.beta),
        ]


def sweep(spec: SweepSpec) -> list[SweepRow]:
    rows = []
    for i, value in enumerate(spec.grid):
        query = spec.query(i)
        source = spec.source.substream(i) if spec.source is not None else None
        est = estimate_beta(query, spec.method, spec.replicates, source)
        rows.append(SweepRow(spec.axis, value, query, spec.method, est.beta))
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.as_csv_row())


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


def fixed_disparity_comparison(
    delta: float,
    high_rates: tuple[float, float],
    low_rates: tuple[float, float],
    n_ref: int,
    n_prot: int,
    config: TestConfig,
) -> tuple[PowerEstimate, PowerEstimate]:
    """Analytic beta for two rate pairs sharing one disparity, at identical sizes.

    Each pair is ``(p_ref, p_prot)``; returns ``(beta_high, beta_low)``.
    """
    for name, (p_ref, p_prot) in (("high_rates", high_rates), ("low_rates", low_rates)):
        if not math.isclose(p_ref - p_prot, delta, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(
                f"{name} {(p_ref, p_prot)} have disparity {p_ref - p_prot:.6g}, expected {delta}"
            )
    high = analytic_beta(PowerQuery(high_rates[0], high_rates[1], n_ref, n_prot, config))
    low = analytic_beta(PowerQuery(low_rates[0], low_rates[1], n_ref, n_prot, config))
    return high, low


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def generate_cohort(
    p_ref: float,
    p_prot: float,
    n_ref: int,
    n_prot: int,
    source: RandomSource,
    reference: str = "reference",
    protected: str = "protected",
) -> CohortTable:
    """Draw a two-group table; the groups use substreams 0 and 1 of ``source``."""
    if n_ref < 1 or n_prot < 1:
        raise ValueError("group sizes must be at least 1")
    k_ref = binomial_sample(n_ref, p_ref, source.substream(0))
    k_prot = binomial_sample(n_prot, p_prot, source.substream(1))
    return CohortTable.two_group(
        GroupOutcomeCounts(reference, n_ref, k_ref),
        GroupOutcomeCounts(protected, n_prot, k_prot),
    )


def cohort_records(table: CohortTable, source: RandomSource) -> list[DecisionRecord]:
    """Expand a table into individual records, shuffled with substream 2 of ``source``."""
    records = [
        DecisionRecord(g.group, 1 if i < g.k else 0)
        for g in table.groups
        for i in range(g.n)
    ]
    order = source.substream(2).generator().permutation(len(records))
    return [records[i] for i in order]
