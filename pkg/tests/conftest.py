"""Acceptance scorecard: tests call ``record`` and the verdicts are printed after the run."""

_RESULTS: dict[int, tuple[bool, str, bool]] = {}


def record(criterion: int, passed: bool, detail: str, report_only: bool = False) -> None:
    _RESULTS[criterion] = (bool(passed), detail, report_only)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_RESULTS):
        passed, detail, report_only = _RESULTS[c]
        verdict = "PASS" if passed else ("REPORT" if report_only else "FAIL")
        terminalreporter.write_line(f"[{verdict}] criterion {c}: {detail}")
