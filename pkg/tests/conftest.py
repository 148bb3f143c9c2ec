import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
