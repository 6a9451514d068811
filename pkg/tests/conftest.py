import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def scenario_dir():
    return SCENARIOS


# -- acceptance criteria: one PASS/FAIL line each, printed in the terminal summary --------

ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.notes: list[str] = []

    def note(self, text: str) -> None:
        self.notes.append(text)

    def __enter__(self):
        import time
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time
        elapsed = time.perf_counter() - self._t0
        over = elapsed >= self.budget
        ok = exc_type is None and not over
        detail = "; ".join(self.notes)
        if exc_type is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        if over:
            detail = (detail + "; " if detail else "") + f"runtime {elapsed:.2f}s over budget"
        line = (f"criterion {self.number:2d} [{'PASS' if ok else 'FAIL'}] {self.title} "
                f"({elapsed:.2f}s / budget {self.budget:g}s){': ' + detail if detail else ''}")
        ACCEPTANCE[self.number] = line
        print(line)
        if over and exc_type is None:
            raise AssertionError(f"criterion {self.number} exceeded its {self.budget:g}s budget ({elapsed:.2f}s)")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
