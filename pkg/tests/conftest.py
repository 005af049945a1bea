"""Acceptance summary: one pass/fail line per criterion at the end of the run."""

ACCEPTANCE = {}


def record_criterion(number, name, passed, detail=""):
    ACCEPTANCE[number] = (name, bool(passed), detail)
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {name}: {detail}")
