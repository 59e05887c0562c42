"""Fairness auditing for binary decisions: parity metrics, two-proportion
z-tests and the type-2 error analysis that says how much a non-detection is
worth."""

__version__ = "0.1.0"

from .cohort import (  # noqa: E402
    CohortTable,
    ColumnBindings,
    DecisionRecord,
    GroupOutcomeCounts,
    aggregate,
    ingest_csv,
    write_csv,
)
from .errors import (  # noqa: E402
    DataError,
    DegenerateVarianceError,
    EmptyStratumError,
    IngestError,
    ParityProbeError,
    SizeGuardError,
    UndefinedRatioError,
    UnreachableTargetError,
)
from .kernels import (  # noqa: E402
    Probability,
    RandomSource,
    binomial_sample,
    log_binomial_coefficient,
    normal_cdf,
    normal_quantile,
)
from .metrics import MetricId, MetricValue, dp_difference, dp_ratio, eo_gaps  # noqa: E402
from .parity import (  # noqa: E402
    Sidedness,
    TestConfig,
    TestResult,
    Variance,
    chi_square_statistic,
    z_test,
)
from .power import (  # noqa: E402
    Axis,
    Method,
    PowerEstimate,
    PowerQuery,
    SweepRow,
    SweepSpec,
    analytic_beta,
    exact_beta,
    fixed_disparity_comparison,
    generate_cohort,
    min_detectable_disparity,
    min_sample_size,
    monte_carlo_beta,
    sweep,
)
from .audit import AuditConfig, AuditMetric, AuditReport, Verdict, run_audit  # noqa: E402
