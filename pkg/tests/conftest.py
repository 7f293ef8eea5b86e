from __future__ import annotations

import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=100, deadline=None, derandomize=True)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    import verdicts

    if verdicts.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts.LINES):
            terminalreporter.write_line(verdicts.LINES[n])
