import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from parity_probe.cohort import (
    CohortTable,
    ColumnBindings,
    DecisionRecord,
    GroupOutcomeCounts,
    aggregate,
    ingest_csv,
    write_csv,
)
from parity_probe.errors import DataError, EmptyStratumError, IngestError

BINDINGS = ColumnBindings("g", "y")


def records_from_counts(counts):
    out = []
    for group, (n, k) in counts.items():
        out += [DecisionRecord(group, 1)] * k + [DecisionRecord(group, 0)] * (n - k)
    return out


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_aggregate_hand_count():
    table = aggregate([DecisionRecord("A", 1), DecisionRecord("A", 0), DecisionRecord("B", 1)])
    assert [(g.group, g.n, g.k) for g in table.groups] == [("A", 2, 1), ("B", 1, 1)]


def test_aggregate_anchor_cohort():
    table = aggregate(records_from_counts({"male": (1800, 720), "female": (200, 60)}))
    assert (table["male"].n, table["male"].k) == (1800, 720)
    assert (table["female"].n, table["female"].k) == (200, 60)
    assert table.labels == ["female", "male"]


def test_aggregate_empty_input():
    with pytest.raises(DataError):
        aggregate([])


def test_aggregate_single_group():
    with pytest.raises(DataError, match="two distinct groups"):
        aggregate([DecisionRecord("A", 1), DecisionRecord("A", 0)])


@pytest.mark.parametrize("outcome", [2, -1, "1", True])
def test_record_rejects_malformed_outcome(outcome):
    with pytest.raises(DataError):
        DecisionRecord("A", outcome)


def test_record_rejects_empty_group():
    with pytest.raises(DataError):
        DecisionRecord("", 1)


def test_aggregate_strata_when_all_records_have_truth():
    recs = [
        DecisionRecord("A", 1, 1), DecisionRecord("A", 0, 1), DecisionRecord("A", 1, 0),
        DecisionRecord("B", 0, 0),
    ]
    table = aggregate(recs)
    a = table["A"]
    assert (a.n1, a.k1, a.n0, a.k0) == (2, 1, 1, 1)
    assert table["B"].has_strata
    with pytest.raises(EmptyStratumError):
        table["B"].stratum(1)


def test_aggregate_drops_strata_if_any_truth_missing():
    table = aggregate([DecisionRecord("A", 1, 1), DecisionRecord("B", 0)])
    assert not table["A"].has_strata


record_lists = st.lists(
    st.builds(
        DecisionRecord,
        st.sampled_from(["a", "b", "c", "zz"]),
        st.integers(0, 1),
    ),
    min_size=2,
).filter(lambda rs: len({r.group for r in rs}) >= 2)


@given(record_lists, st.randoms())
def test_aggregate_permutation_invariant(records, rnd):
    shuffled = list(records)
    rnd.shuffle(shuffled)
    assert aggregate(records) == aggregate(shuffled)


@given(record_lists)
def test_aggregate_totals(records):
    table = aggregate(records)
    assert sum(g.n for g in table.groups) == len(records)
    assert sum(g.k for g in table.groups) == sum(r.outcome for r in records)


@given(
    st.lists(
        st.builds(DecisionRecord, st.text(min_size=1).filter(lambda s: "\x00" not in s), st.integers(0, 1), st.integers(0, 1)),
        max_size=30,
    )
)
def test_csv_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "records.csv"
    bindings = ColumnBindings("group", "outcome", "truth")
    write_csv(records, path, bindings)
    assert ingest_csv(path, bindings) == records


def test_ingest_three_rows(tmp_path):
    path = write(tmp_path, "g,y\nA,1\nB,0\nA,0\n")
    assert ingest_csv(path, BINDINGS) == [
        DecisionRecord("A", 1), DecisionRecord("B", 0), DecisionRecord("A", 0)
    ]


def test_ingest_reports_row_of_bad_outcome(tmp_path):
    path = write(tmp_path, "g,y\nA,1\nA,0\nB,1\nB,0\nB,2\nA,1\n")
    with pytest.raises(IngestError, match="row 5") as info:
        ingest_csv(path, BINDINGS)
    assert info.value.row == 5


def test_ingest_truth_column(tmp_path):
    path = write(tmp_path, "g,y,t,extra\nA,1,1,x\nB,0,1,y\n")
    recs = ingest_csv(path, ColumnBindings("g", "y", "t"))
    assert recs == [DecisionRecord("A", 1, 1), DecisionRecord("B", 0, 1)]


@pytest.mark.parametrize("cell", ["yes", "true", " 1", "1.0", ""])
def test_ingest_no_coercion(tmp_path, cell):
    path = write(tmp_path, f"g,y\nA,1\nB,{cell}\n")
    with pytest.raises(IngestError, match="row 2"):
        ingest_csv(path, BINDINGS)


def test_ingest_empty_group_cell(tmp_path):
    path = write(tmp_path, "g,y\nA,1\n,0\n")
    with pytest.raises(IngestError, match="row 2"):
        ingest_csv(path, BINDINGS)


def test_ingest_missing_column(tmp_path):
    path = write(tmp_path, "group,y\nA,1\n")
    with pytest.raises(DataError, match="'g'"):
        ingest_csv(path, BINDINGS)


def test_ingest_blank_line_is_not_skipped(tmp_path):
    path = write(tmp_path, "g,y\nA,1\n\nB,0\n")
    with pytest.raises(IngestError, match="row 2"):
        ingest_csv(path, BINDINGS)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_csv(tmp_path / "nope.csv", BINDINGS)


def test_table_designation_rules():
    table = CohortTable.from_counts({"A": (10, 5), "B": (10, 3)})
    with pytest.raises(DataError):
        table.ref
    with pytest.raises(DataError):
        table.designate("A", "A")
    with pytest.raises(DataError):
        table.designate("A", "C")
    d = table.designate("A", "B")
    assert d.ref.group == "A" and d.swapped().ref.group == "B"


def test_group_counts_invariants():
    with pytest.raises(DataError):
        GroupOutcomeCounts("A", 0, 0)
    with pytest.raises(DataError):
        GroupOutcomeCounts("A", 5, 6)
    with pytest.raises(DataError):
        GroupOutcomeCounts("A", 5, 2, 3, 1, 1, 1)
