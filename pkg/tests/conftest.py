import os

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    doc = dict(report.user_properties).get("criterion", name)
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _criteria[name] = ("PASS" if report.passed else "FAIL", doc)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        status, doc = _criteria[name]
        terminalreporter.write_line(f"{status}  {doc}")
