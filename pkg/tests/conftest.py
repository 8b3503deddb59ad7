import pytest

from activesampling.synthetic import SyntheticConfig, synthetic_collection
from instances import three_run_instance, tiny_instance

_acceptance: dict[str, tuple[str, str, str]] = {}


@pytest.fixture
def tiny():
    return tiny_instance()


@pytest.fixture
def three_runs():
    return three_run_instance()


@pytest.fixture(scope="session")
def reference_collection():
    return synthetic_collection(SyntheticConfig(n_topics=10, seed=0))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_ac"):
        if report.when == "call" or (report.when == "setup" and report.skipped):
            label = item.name.split("_")[1].upper()
            doc = (item.function.__doc__ or "").strip().splitlines()[0] if item.function.__doc__ else item.name
            detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
            status = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
            _acceptance[label] = (status, doc, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s[2:])):
        status, doc, detail = _acceptance[label]
        line = f"{label} {status}  {doc}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
