import pytest

from viewinstruct.adapters import LookupCaptioner
from viewinstruct.templates import DatasetSpec, generate_dataset


@pytest.fixture(scope="session")
def dataset():
    return generate_dataset(DatasetSpec(count=300, seed=7))


@pytest.fixture(scope="session")
def captioner(dataset):
    return LookupCaptioner.from_records(dataset)


_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and (report.when == "call" or report.outcome != "passed"):
        if report.when == "call" or report.outcome == "failed":
            _acceptance.append((report.nodeid.split("::")[-1], report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome:7s} {name}")
