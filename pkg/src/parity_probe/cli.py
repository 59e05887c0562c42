"""``parity-probe`` command line interface.

Exit codes: 0 compliant with adequate power (or any successful non-audit
command), 1 usage error, 2 data error, 3 inconclusive, 4 violation detected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .audit import AuditConfig, AuditMetric, Verdict, run_audit
from .cohort import ColumnBindings, write_csv, write_records
from .errors import DataError, DegenerateVarianceError, ParityProbeError
from .kernels import RandomSource
from .parity import Sidedness, TestConfig, Variance
from .power import (
    Axis,
    Method,
    PowerQuery,
    SweepSpec,
    cohort_records,
    estimate_beta,
    generate_cohort,
    min_detectable_disparity,
    min_group_sizes,
    sweep,
    write_sweep_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INCONCLUSIVE = 3
EXIT_VIOLATION = 4

VERDICT_EXIT = {
    Verdict.COMPLIANT_ADEQUATE_POWER: EXIT_OK,
    Verdict.INCONCLUSIVE_LOW_POWER: EXIT_INCONCLUSIVE,
    Verdict.INCONCLUSIVE_DEGENERATE: EXIT_INCONCLUSIVE,
    Verdict.VIOLATION_DETECTED: EXIT_VIOLATION,
}

SEED_ENV = "PARITY_PROBE_SEED"
DEFAULT_SEED = 0

# normative parameters that must always be given explicitly
_NORMATIVE = {
    "alpha": ("--alpha", "significance level (tolerated type-1 error)"),
    "epsilon": ("--epsilon", "smallest disparity considered relevant"),
    "max_beta": ("--max-beta", "largest acceptable type-2 error"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2
        raise UsageError(f"{self.prog}: {message}")


def _resolve_seed(flag: Optional[int]) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _parse_grid(text: str, integer: bool) -> tuple:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    conv = int if integer else float
    try:
        if ":" in text:
            start, stop, step = (Fraction(part) for part in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            values = []
            v = start
            while v <= stop:
                values.append(v)
                v += step
            return tuple(int(v) if integer else float(v) for v in values)
        return tuple(conv(part) for part in text.split(","))
    except ValueError as exc:
        raise UsageError(f"invalid --grid {text!r}: {exc}") from None


def _add_test_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="significance level (required)")
    p.add_argument("--sidedness", choices=[s.value for s in Sidedness], default=Sidedness.TWO_SIDED.value)
    p.add_argument("--variance", choices=[v.value for v in Variance], default=Variance.POOLED.value)


def _add_random_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None, help=f"random seed (falls back to ${SEED_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parity-probe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    audit = sub.add_parser("audit", help="audit a decision CSV for parity violations")
    audit.add_argument("--input", required=True)
    audit.add_argument("--group-col", required=True)
    audit.add_argument("--outcome-col", required=True)
    audit.add_argument("--truth-col")
    audit.add_argument("--protected", required=True)
    audit.add_argument("--reference", required=True)
    audit.add_argument("--metric", choices=[m.value for m in AuditMetric], required=True)
    _add_test_options(audit)
    audit.add_argument("--epsilon", type=float, help="relevant disparity (required)")
    audit.add_argument("--max-beta", type=float, help="largest acceptable type-2 error (required)")
    audit.add_argument("--monte-carlo", action="store_true")
    _add_random_options(audit)
    audit.add_argument("--out")

    power = sub.add_parser("power", help="type-2 error of the z-test for given true rates")
    power.add_argument("--p-ref", type=float, required=True)
    power.add_argument("--p-prot", type=float, required=True)
    power.add_argument("--n-ref", type=int, required=True)
    power.add_argument("--n-prot", type=int, required=True)
    _add_test_options(power)
    power.add_argument("--method", choices=[m.value for m in Method], default=Method.ANALYTIC.value)
    _add_random_options(power)
    power.add_argument("--out")

    size = sub.add_parser("samplesize", help="smallest total sample size reaching a target beta")
    size.add_argument("--p-ref", type=float, required=True)
    size.add_argument("--p-prot", type=float, required=True)
    size.add_argument("--target-beta", type=float, required=True)
    size.add_argument("--ratio", default="1", help="allocation ratio n_ref:n_prot, e.g. 9 or 9:1")
    _add_test_options(size)
    size.add_argument("--out")

    mde = sub.add_parser("mde", help="smallest disparity detectable at given sizes")
    mde.add_argument("--base-rate", type=float, required=True)
    mde.add_argument("--n-ref", type=int, required=True)
    mde.add_argument("--n-prot", type=int, required=True)
    mde.add_argument("--target-beta", type=float, required=True)
    _add_test_options(mde)
    mde.add_argument("--out")

    sw = sub.add_parser("sweep", help="beta over a grid of sample sizes or protected rates (CSV)")
    sw.add_argument("--axis", choices=["total-n", Axis.TOTAL_SAMPLE_SIZE.value, Axis.PROTECTED_RATE.value], required=True)
    sw.add_argument("--grid", required=True, help="start:stop:step (inclusive) or comma list")
    sw.add_argument("--p-ref", type=float, required=True)
    sw.add_argument("--p-prot", type=float)
    sw.add_argument("--total-n", type=int)
    sw.add_argument("--ratio", default="1")
    _add_test_options(sw)
    sw.add_argument("--method", choices=[m.value for m in Method], default=Method.ANALYTIC.value)
    _add_random_options(sw)
    sw.add_argument("--out")

    sim = sub.add_parser("simulate", help="write a synthetic decision CSV")
    sim.add_argument("--p-ref", type=float, required=True)
    sim.add_argument("--p-prot", type=float, required=True)
    sim.add_argument("--n-ref", type=int, required=True)
    sim.add_argument("--n-prot", type=int, required=True)
    sim.add_argument("--reference-label", default="reference")
    sim.add_argument("--protected-label", default="protected")
    sim.add_argument("--group-col", default="group")
    sim.add_argument("--outcome-col", default="outcome")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out")
    return parser


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            flag, meaning = _NORMATIVE[name]
            raise UsageError(
                f"{args.command}: missing required normative parameter {flag} ({meaning}); "
                "there is no default"
            )


def _ratio(text: str) -> Fraction:
    try:
        if ":" in text:
            a, b = text.split(":")
            return Fraction(a) / Fraction(b)
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"invalid allocation ratio {text!r}") from None


def _test_config(args: argparse.Namespace) -> TestConfig:
    _require(args, "alpha")
    return TestConfig(args.alpha, Sidedness(args.sidedness), Variance(args.variance))


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_json(obj: dict, out: Optional[str]) -> None:
    _emit(json.dumps(obj, indent=2) + "\n", out)


def _cmd_audit(args: argparse.Namespace) -> int:
    _require(args, "alpha", "epsilon", "max_beta")
    config = AuditConfig(
        bindings=ColumnBindings(args.group_col, args.outcome_col, args.truth_col),
        protected=args.protected,
        reference=args.reference,
        metric=AuditMetric(args.metric),
        test=_test_config(args),
        epsilon=args.epsilon,
        max_beta=args.max_beta,
        monte_carlo=args.monte_carlo,
        replicates=args.replicates,
        seed=_resolve_seed(args.seed),
    )
    report = run_audit(args.input, config)
    _emit(report.to_json(), args.out)
    print(f"verdict: {report.verdict.value}", file=sys.stderr)
    return VERDICT_EXIT[report.verdict]


def _cmd_power(args: argparse.Namespace) -> int:
    query = PowerQuery(args.p_ref, args.p_prot, args.n_ref, args.n_prot, _test_config(args))
    method = Method(args.method)
    source = RandomSource(_resolve_seed(args.seed)) if method is Method.MONTE_CARLO else None
    est = estimate_beta(query, method, args.replicates, source)
    _emit_json({"query": query.as_dict(), **est.as_dict()}, args.out)
    return EXIT_OK


def _cmd_samplesize(args: argparse.Namespace) -> int:
    config = _test_config(args)
    ratio = _ratio(args.ratio)
    n_ref, n_prot = min_group_sizes(args.p_ref, args.p_prot, args.target_beta, ratio, config)
    _emit_json(
        {
            "p_ref": args.p_ref,
            "p_prot": args.p_prot,
            "target_beta": args.target_beta,
            "allocation_ratio": str(ratio),
            **config.as_dict(),
            "n_ref": n_ref,
            "n_prot": n_prot,
            "total_n": n_ref + n_prot,
        },
        args.out,
    )
    return EXIT_OK


def _cmd_mde(args: argparse.Namespace) -> int:
    config = _test_config(args)
    delta = min_detectable_disparity(args.base_rate, args.n_ref, args.n_prot, args.target_beta, config)
    _emit_json(
        {
            "base_rate": args.base_rate,
            "n_ref": args.n_ref,
            "n_prot": args.n_prot,
            "target_beta": args.target_beta,
            **config.as_dict(),
            "min_detectable_disparity": delta,
        },
        args.out,
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _test_config(args)
    axis = Axis.TOTAL_SAMPLE_SIZE if args.axis == "total-n" else Axis(args.axis)
    method = Method(args.method)
    grid = _parse_grid(args.grid, integer=axis is Axis.TOTAL_SAMPLE_SIZE)
    if axis is Axis.TOTAL_SAMPLE_SIZE and args.p_prot is None:
        raise UsageError("sweep: --p-prot is required for a total-n sweep")
    if axis is Axis.PROTECTED_RATE and args.total_n is None:
        raise UsageError("sweep: --total-n is required for a protected-rate sweep")
    spec = SweepSpec(
        axis=axis,
        grid=grid,
        p_ref=args.p_ref,
        config=config,
        p_prot=args.p_prot,
        total_n=args.total_n,
        allocation_ratio=_ratio(args.ratio),
        method=method,
        replicates=args.replicates,
        source=RandomSource(_resolve_seed(args.seed)) if method is Method.MONTE_CARLO else None,
    )
    rows = sweep(spec)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    source = RandomSource(_resolve_seed(args.seed))
    table = generate_cohort(
        args.p_ref, args.p_prot, args.n_ref, args.n_prot, source,
        reference=args.reference_label, protected=args.protected_label,
    )
    records = cohort_records(table, source)
    bindings = ColumnBindings(args.group_col, args.outcome_col)
    if args.out:
        write_csv(records, args.out, bindings)
    else:
        write_records(records, sys.stdout, bindings)
    for g in table.groups:
        print(f"{g.group}: n={g.n} k={g.k}", file=sys.stderr)
    return EXIT_OK


_COMMANDS = {
    "audit": _cmd_audit,
    "power": _cmd_power,
    "samplesize": _cmd_samplesize,
    "mde": _cmd_mde,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("parity-probe: a subcommand is required: " + ", ".join(_COMMANDS))
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateVarianceError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParityProbeError, ValueError) as exc:
        # out-of-range or unattainable parameters
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
