"""Decision records, per-group outcome counts and CSV ingestion."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

from .errors import DataError, EmptyStratumError, IngestError


@dataclass(frozen=True)
class DecisionRecord:
    group: str
    outcome: int
    truth: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.group, str) or not self.group:
            raise DataError(f"group label must be a non-empty string, got {self.group!r}")
        if self.outcome not in (0, 1) or isinstance(self.outcome, bool):
            raise DataError(f"outcome must be 0 or 1, got {self.outcome!r}")
        if self.truth is not None and (self.truth not in (0, 1) or isinstance(self.truth, bool)):
            raise DataError(f"truth must be 0, 1 or absent, got {self.truth!r}")


@dataclass(frozen=True)
class GroupOutcomeCounts:
    """Sufficient statistics of one group: ``n`` records, ``k`` positives.

    When ground truth is known, ``n1``/``k1`` count the truth=1 stratum and
    ``n0``/``k0`` the truth=0 stratum.
    """

    group: str
    n: int
    k: int
    n1: Optional[int] = None
    k1: Optional[int] = None
    n0: Optional[int] = None
    k0: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.group:
            raise DataError("group label must be non-empty")
        if self.n < 1:
            raise DataError(f"group {self.group!r} must have n >= 1, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise DataError(f"group {self.group!r} needs 0 <= k <= n, got k={self.k}, n={self.n}")
        strata = (self.n1, self.k1, self.n0, self.k0)
        if any(s is not None for s in strata):
            if any(s is None for s in strata):
                raise DataError(f"group {self.group!r} has partially specified truth strata")
            if self.n1 + self.n0 != self.n or self.k1 + self.k0 != self.k:
                raise DataError(f"group {self.group!r} strata do not add up to its totals")
            if not (0 <= self.k1 <= self.n1 and 0 <= self.k0 <= self.n0):
                raise DataError(f"group {self.group!r} has a stratum with k outside [0, n]")

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def has_strata(self) -> bool:
        return self.n1 is not None

    def stratum(self, truth: int) -> "GroupOutcomeCounts":
        """Counts restricted to records whose ground truth equals ``truth``."""
        if not self.has_strata:
            raise DataError(f"group {self.group!r} has no ground-truth labels")
        n, k = (self.n1, self.k1) if truth == 1 else (self.n0, self.k0)
        if n == 0:
            raise EmptyStratumError(self.group, truth)
        return GroupOutcomeCounts(self.group, n, k)

    def scaled(self, factor: int) -> "GroupOutcomeCounts":
        def mul(v: Optional[int]) -> Optional[int]:
            return None if v is None else v * factor

        return GroupOutcomeCounts(
            self.group, self.n * factor, self.k * factor,
            mul(self.n1), mul(self.k1), mul(self.n0), mul(self.k0),
        )


@dataclass(frozen=True)
class CohortTable:
    """Per-group counts, ordered by label, with optional two-sample designation."""

    groups: tuple[GroupOutcomeCounts, ...]
    reference: Optional[str] = None
    protected: Optional[str] = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        groups = tuple(self.groups)
        object.__setattr__(self, "groups", groups)
        labels = [g.group for g in groups]
        if len(set(labels)) != len(labels):
            raise DataError(f"duplicate group labels in {labels}")
        if len(groups) < 2:
            raise DataError(f"at least two groups are required, got {len(groups)}")
        object.__setattr__(self, "_index", {g.group: g for g in groups})
        if (self.reference is None) != (self.protected is None):
            raise DataError("reference and protected groups must be designated together")
        if self.reference is not None:
            if self.reference == self.protected:
                raise DataError("reference and protected groups must differ")
            for role, label in (("reference", self.reference), ("protected", self.protected)):
                if label not in self._index:
                    raise DataError(f"{role} group {label!r} not found; groups are {labels}")

    @classmethod
    def from_counts(
        cls,
        counts: Mapping[str, tuple[int, int]],
        reference: Optional[str] = None,
        protected: Optional[str] = None,
    ) -> "CohortTable":
        """Build a table from ``{label: (n, k)}``."""
        groups = tuple(GroupOutcomeCounts(g, n, k) for g, (n, k) in sorted(counts.items()))
        return cls(groups, reference, protected)

    @classmethod
    def two_group(cls, ref: GroupOutcomeCounts, prot: GroupOutcomeCounts) -> "CohortTable":
        return cls(tuple(sorted((ref, prot), key=lambda g: g.group)), ref.group, prot.group)

    @property
    def labels(self) -> list[str]:
        return [g.group for g in self.groups]

    def __getitem__(self, label: str) -> GroupOutcomeCounts:
        try:
            return self._index[label]
        except KeyError:
            raise DataError(f"unknown group {label!r}; groups are {self.labels}") from None

    def designate(self, reference: str, protected: str) -> "CohortTable":
        return CohortTable(self.groups, reference, protected)

    def _require_designation(self) -> None:
        if self.reference is None:
            raise DataError("reference and protected groups have not been designated")

    @property
    def ref(self) -> GroupOutcomeCounts:
        self._require_designation()
        return self._index[self.reference]

    @property
    def prot(self) -> GroupOutcomeCounts:
        self._require_designation()
        return self._index[self.protected]

    def swapped(self) -> "CohortTable":
        self._require_designation()
        return CohortTable(self.groups, self.protected, self.reference)

    def stratum(self, truth: int) -> "CohortTable":
        """Two-group table restricted to one ground-truth stratum."""
        return CohortTable.two_group(self.ref.stratum(truth), self.prot.stratum(truth))

    def scaled(self, factor: int) -> "CohortTable":
        return CohortTable(tuple(g.scaled(factor) for g in self.groups), self.reference, self.protected)


def aggregate(
    records: Iterable[DecisionRecord],
    reference: Optional[str] = None,
    protected: Optional[str] = None,
) -> CohortTable:
    """Count records per group. Groups are ordered lexicographically by label.

    Truth strata are filled in only when every record carries a truth label.
    """
    tallies: dict[str, list[int]] = {}
    all_truth = True
    total = 0
    for rec in records:
        if not isinstance(rec, DecisionRecord):
            raise DataError(f"expected DecisionRecord, got {type(rec).__name__}")
        total += 1
        # [n, k, n1, k1, n0, k0]
        t = tallies.setdefault(rec.group, [0, 0, 0, 0, 0, 0])
        t[0] += 1
        t[1] += rec.outcome
        if rec.truth is None:
            all_truth = False
        elif rec.truth == 1:
            t[2] += 1
            t[3] += rec.outcome
        else:
            t[4] += 1
            t[5] += rec.outcome
    if total == 0:
        raise DataError("no decision records supplied")
    if len(tallies) < 2:
        raise DataError(f"at least two distinct groups are required, got {sorted(tallies)}")
    groups = []
    for label in sorted(tallies):
        n, k, n1, k1, n0, k0 = tallies[label]
        if all_truth:
            groups.append(GroupOutcomeCounts(label, n, k, n1, k1, n0, k0))
        else:
            groups.append(GroupOutcomeCounts(label, n, k))
    return CohortTable(tuple(groups), reference, protected)


@dataclass(frozen=True)
class ColumnBindings:
    group: str
    outcome: str
    truth: Optional[str] = None


def _binary_cell(value: str, column: str, row: int) -> int:
    if value == "0":
        return 0
    if value == "1":
        return 1
    raise IngestError(f"column {column!r} must be '0' or '1', got {value!r}", row)


def ingest_csv(path: str | Path, bindings: ColumnBindings) -> list[DecisionRecord]:
    """Read one :class:`DecisionRecord` per data row.

    Row numbers in errors are 1-based and count data rows only (the header is
    not row 1).
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty; a header row is required") from None
        except UnicodeDecodeError as exc:
            raise DataError(f"{path} is not valid UTF-8: {exc}") from None
        wanted = [("group", bindings.group), ("outcome", bindings.outcome)]
        if bindings.truth is not None:
            wanted.append(("truth", bindings.truth))
        positions = {}
        for role, name in wanted:
            if name not in header:
                raise DataError(f"{role} column {name!r} not found in header {header}")
            positions[role] = header.index(name)

        records = []
        row = 0
        try:
            for cells in reader:
                row += 1
                if len(cells) != len(header):
                    raise IngestError(
                        f"expected {len(header)} fields, found {len(cells)}", row
                    )
                group = cells[positions["group"]]
                if not group:
                    raise IngestError(f"empty cell in group column {bindings.group!r}", row)
                outcome = _binary_cell(cells[positions["outcome"]], bindings.outcome, row)
                truth = None
                if "truth" in positions:
                    truth = _binary_cell(cells[positions["truth"]], bindings.truth, row)
                records.append(DecisionRecord(group, outcome, truth))
        except UnicodeDecodeError as exc:
            raise IngestError(f"invalid UTF-8: {exc}", row + 1) from None
        except csv.Error as exc:
            raise IngestError(str(exc), row) from None
    return records


def write_records(
    records: Sequence[DecisionRecord],
    fh: TextIO,
    bindings: ColumnBindings = ColumnBindings("group", "outcome"),
) -> None:
    """Write records in the format :func:`ingest_csv` reads."""
    columns = [bindings.group, bindings.outcome]
    if bindings.truth is not None:
        columns.append(bindings.truth)
    # \r\n terminator makes the writer quote labels containing either character
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(columns)
    for rec in records:
        row = [rec.group, str(rec.outcome)]
        if bindings.truth is not None:
            if rec.truth is None:
                raise DataError(f"record for group {rec.group!r} has no truth label")
            row.append(str(rec.truth))
        writer.writerow(row)


def write_csv(
    records: Sequence[DecisionRecord],
    path: str | Path,
    bindings: ColumnBindings = ColumnBindings("group", "outcome"),
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        write_records(records, fh, bindings)
