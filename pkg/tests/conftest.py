import contextlib

import pytest

from parity_probe.cohort import ColumnBindings, DecisionRecord, write_csv


def records_for(counts):
    """Expand ``{group: (n, k)}`` into decision records, positives first."""
    out = []
    for group, (n, k) in counts.items():
        out += [DecisionRecord(group, 1)] * k + [DecisionRecord(group, 0)] * (n - k)
    return out


@pytest.fixture
def cohort_csv(tmp_path):
    def make(counts, name="cohort.csv"):
        path = tmp_path / name
        write_csv(records_for(counts), path, ColumnBindings("g", "y"))
        return path

    return make


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL line per acceptance criterion."""
    results = request.config.stash.setdefault(_ACCEPTANCE, [])

    @contextlib.contextmanager
    def record(number, title):
        detail = {}
        try:
            yield detail
        except BaseException as exc:
            line = f"criterion {number:>2} FAIL  {title}: {exc}".splitlines()[0]
            results.append(line)
            print(line)
            raise
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = f"criterion {number:>2} PASS  {title}" + (f" ({extra})" if extra else "")
        results.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
