import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = []


def record_criterion(number, title, checks):
    """Store one PASS/FAIL line for an acceptance criterion and return whether all checks held.

    ``checks`` is a list of (description, ok) pairs; failing descriptions are
    listed on the line.
    """
    failed = [desc for desc, ok in checks if not ok]
    status = "FAIL" if failed else "PASS"
    detail = "; ".join(failed) if failed else "; ".join(desc for desc, _ in checks)
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number} {title}: {detail}")
    return not failed, failed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
