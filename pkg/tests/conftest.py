import os
import sys

from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
