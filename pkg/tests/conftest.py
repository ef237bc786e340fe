from __future__ import annotations

import contextlib

from hypothesis import settings

# first calls pay for lazy imports (sympy); wall-clock deadlines only add flakiness
settings.register_profile("repo", deadline=None)
settings.load_profile("repo")

# criterion number -> (passed, description); filled by tests/test_acceptance.py
CRITERIA: dict[int, tuple[bool, str]] = {}


@contextlib.contextmanager
def criterion(number: int, description: str):
    ok = False
    try:
        yield
        ok = True
    finally:
        # a criterion checked by several tests passes only if all of them do
        prev = CRITERIA.get(number, (True, description))[0]
        CRITERIA[number] = (prev and ok, description)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {description}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, description = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {description}")
