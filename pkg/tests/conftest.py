"""Shared pytest hooks: print collected acceptance verdict lines at the end.

Verdict lines are emitted through the terminal reporter because ordinary
stdout writes from passing tests are captured and discarded.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
