"""Audit runs: metrics, parity tests and power diagnostics combined into a verdict."""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .cohort import CohortTable, ColumnBindings, aggregate, ingest_csv
from .errors import DegenerateVarianceError, UndefinedRatioError
from .kernels import RandomSource
from .metrics import dp_difference, dp_ratio, eo_gaps
from .parity import Sidedness, TestConfig, z_test
from .power import PowerQuery, analytic_beta, monte_carlo_beta


class AuditMetric(str, Enum):
    DP_DIFFERENCE = "dp-difference"
    DP_RATIO = "dp-ratio"
    EQUALIZED_ODDS = "equalized-odds"


class Verdict(str, Enum):
    VIOLATION_DETECTED = "violation_detected"
    COMPLIANT_ADEQUATE_POWER = "compliant_adequate_power"
    INCONCLUSIVE_LOW_POWER = "inconclusive_low_power"
    INCONCLUSIVE_DEGENERATE = "inconclusive_degenerate"


@dataclass(frozen=True)
class AuditConfig:
    """Everything an audit needs. ``alpha``, ``epsilon`` and ``max_beta`` have
    no defaults because they encode what counts as a relevant, reliably
    detected disparity in the deployment context.
    """

    bindings: ColumnBindings
    protected: str
    reference: str
    metric: AuditMetric
    test: TestConfig
    epsilon: float
    max_beta: float
    monte_carlo: bool = False
    replicates: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric", AuditMetric(self.metric))
        if not self.protected or not self.reference:
            raise ValueError("protected and reference group labels are required")
        if self.protected == self.reference:
            raise ValueError("protected and reference groups must differ")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 <= self.max_beta <= 1.0:
            raise ValueError(f"max_beta must lie in [0, 1], got {self.max_beta}")
        if self.metric is AuditMetric.EQUALIZED_ODDS and self.bindings.truth is None:
            raise ValueError("equalized-odds audits need a truth column binding")

    def as_dict(self) -> dict:
        return {
            "group_column": self.bindings.group,
            "outcome_column": self.bindings.outcome,
            "truth_column": self.bindings.truth,
            "protected": self.protected,
            "reference": self.reference,
            "metric": self.metric.value,
            **self.test.as_dict(),
            "epsilon": self.epsilon,
            "max_beta": self.max_beta,
            "monte_carlo": self.monte_carlo,
            "replicates": self.replicates if self.monte_carlo else None,
            "seed": self.seed if self.monte_carlo else None,
        }


def decide_verdict(
    rejects: Sequence[bool],
    degenerate: bool,
    betas: Sequence[Optional[float]],
    max_beta: float,
) -> Verdict:
    """Combine test outcomes and power diagnostics.

    Any rejection wins. Otherwise a test that could not be run makes the audit
    inconclusive. Otherwise non-detection only counts as adequately powered
    when every diagnostic beta (``None`` = undefined) is within ``max_beta``.
    """
    if any(rejects):
        return Verdict.VIOLATION_DETECTED
    if degenerate:
        return Verdict.INCONCLUSIVE_DEGENERATE
    if betas and all(b is not None and b <= max_beta for b in betas):
        return Verdict.COMPLIANT_ADEQUATE_POWER
    return Verdict.INCONCLUSIVE_LOW_POWER


@dataclass
class AuditReport:
    config: dict
    groups: list
    metrics: list
    tests: list
    power_diagnostics: list
    verdict: Verdict
    generated_at: str = ""
    tool_version: str = __version__

    def as_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "generated_at": self.generated_at,
            "config": self.config,
            "groups": self.groups,
            "metrics": self.metrics,
            "tests": self.tests,
            "power_diagnostics": self.power_diagnostics,
            "verdict": self.verdict.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"


def _group_dict(g) -> dict:
    out: dict[str, Any] = {"group": g.group, "n": g.n, "k": g.k, "rate": g.rate}
    if g.has_strata:
        out.update(n_truth1=g.n1, k_truth1=g.k1, n_truth0=g.n0, k_truth0=g.k0)
    return out


def _diagnostic_rates(pooled: float, epsilon: float, sidedness: Sidedness) -> Optional[tuple[float, float]]:
    # shift toward the tested direction; mirror when that leaves (0, 1)
    step = epsilon if sidedness is Sidedness.PROTECTED_HIGHER else -epsilon
    for p_prot in (pooled + step, pooled - step):
        if 0.0 < p_prot < 1.0:
            return pooled, p_prot
    return None


def _evaluate(
    name: str,
    table: CohortTable,
    test_config: TestConfig,
    config: AuditConfig,
    source: RandomSource,
) -> tuple[dict, dict, Optional[bool], list[Optional[float]]]:
    test_entry: dict[str, Any] = {"name": name, "alpha": test_config.alpha}
    reject: Optional[bool]
    try:
        result = z_test(table, test_config)
    except DegenerateVarianceError as exc:
        test_entry.update(status="degenerate", detail=str(exc))
        reject = None
    else:
        test_entry.update(status="ok", **result.as_dict())
        reject = result.reject

    ref, prot = table.ref, table.prot
    pooled = (ref.k + prot.k) / (ref.n + prot.n)
    diag: dict[str, Any] = {
        "name": name,
        "epsilon": config.epsilon,
        "n_ref": ref.n,
        "n_prot": prot.n,
        "alpha": test_config.alpha,
    }
    betas: list[Optional[float]] = []
    rates = _diagnostic_rates(pooled, config.epsilon, test_config.sidedness) if 0.0 < pooled < 1.0 else None
    if rates is None:
        diag.update(p_ref=pooled, p_prot=None, analytic=None)
        betas.append(None)
    else:
        query = PowerQuery(rates[0], rates[1], ref.n, prot.n, test_config)
        diag.update(p_ref=query.p_ref, p_prot=query.p_prot)
        est = analytic_beta(query)
        diag["analytic"] = est.as_dict()
        betas.append(est.beta)
        if config.monte_carlo:
            mc = monte_carlo_beta(query, config.replicates, source)
            diag["monte_carlo"] = mc.as_dict()
            betas.append(mc.beta)
    return test_entry, diag, reject, betas


def audit_table(table: CohortTable, config: AuditConfig, generated_at: Optional[str] = None) -> AuditReport:
    """Run the configured audit on an already aggregated table."""
    table = table.designate(config.reference, config.protected)
    root = RandomSource(config.seed)

    metrics: list[dict] = []
    if config.metric is AuditMetric.EQUALIZED_ODDS:
        metrics.extend(m.as_dict() for m in eo_gaps(table))
        alpha = config.test.alpha / 2  # Bonferroni over the two strata
        cases = [
            ("equalized-odds-tpr", table.stratum(1), config.test.with_alpha(alpha)),
            ("equalized-odds-fpr", table.stratum(0), config.test.with_alpha(alpha)),
        ]
    else:
        try:
            metric = dp_difference(table) if config.metric is AuditMetric.DP_DIFFERENCE else dp_ratio(table)
            metrics.append(metric.as_dict())
        except UndefinedRatioError as exc:
            metrics.append({"metric": config.metric.value, "value": None, "detail": str(exc)})
        cases = [("demographic-parity", table, config.test)]

    tests, diagnostics, rejects, betas = [], [], [], []
    degenerate = False
    for i, (name, sub, cfg) in enumerate(cases):
        entry, diag, reject, b = _evaluate(name, sub, cfg, config, root.substream(i))
        tests.append(entry)
        diagnostics.append(diag)
        if reject is None:
            degenerate = True
        else:
            rejects.append(reject)
        betas.extend(b)

    if generated_at is None:
        generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return AuditReport(
        config=config.as_dict(),
        groups=[_group_dict(g) for g in table.groups],
        metrics=metrics,
        tests=tests,
        power_diagnostics=diagnostics,
        verdict=decide_verdict(rejects, degenerate, betas, config.max_beta),
        generated_at=generated_at,
    )


def run_audit(data: str | Path, config: AuditConfig, generated_at: Optional[str] = None) -> AuditReport:
    """Ingest ``data`` and audit it. Ingestion errors propagate with row numbers."""
    records = ingest_csv(data, config.bindings)
    table = aggregate(records)
    report = audit_table(table, config, generated_at)
    report.config = {"input": str(data), **report.config}
    return report
