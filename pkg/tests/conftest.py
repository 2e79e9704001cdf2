import pytest

# filled by tests/test_acceptance.py: criterion number -> (passed, detail)
ACCEPTANCE = {}


def record(num, passed, detail):
    ACCEPTANCE[num] = (bool(passed), detail)
    print(f"CRITERION {num}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def report_criterion():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
