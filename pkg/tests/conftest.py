"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        name = report.nodeid.rsplit("::", 1)[-1].removeprefix("test_")
        measured = dict(report.user_properties).get("measured", "")
        _criteria[name] = ("PASS" if report.passed else "FAIL", measured)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        verdict, measured = _criteria[name]
        terminalreporter.write_line(f"{verdict}  {name}  {measured}")
