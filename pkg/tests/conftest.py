from dataclasses import dataclass, field

import numpy as np
import pytest

from yaglom import load_model

ACCEPTANCE_KEY = pytest.StashKey[dict]()

CRITERIA = {
    "1": "1D closed-form equivalence (linfrac 0.6/0.3, n=512)",
    "2": "functional-equation residual (m=0.776, n=2048 and 8192)",
    "3": "hard regime (m=0.942): dense n=4096 defects, low-rank n=131072 repair",
    "4": "decay envelope (m=0.776, n=8192)",
    "5": "singular-value bounds (linfrac p0=0.55 and 0.95, n=1000)",
    "6": "low-rank vs dense agreement (n=512)",
    "7": "2D closed-form equivalence (dense n=64, low-rank n=256)",
    "8": "2D random polynomial model (n=256)",
    "9": "baseline failure modes",
    "10": "moment cross-validation",
    "T": "low-rank timing grows sub-quadratically",
}


@dataclass
class Check:
    label: str
    passed: bool
    detail: str


@dataclass
class CriterionRecord:
    checks: list = field(default_factory=list)
    error: str = ""

    @property
    def passed(self) -> bool:
        return not self.error and bool(self.checks) and all(c.passed for c in self.checks)


class Recorder:
    """Collects named checks for one acceptance criterion, asserts on exit."""

    def __init__(self, record: CriterionRecord):
        self.record = record
        self._start = len(record.checks)

    def check(self, label, passed, detail=""):
        self.record.checks.append(Check(label, bool(passed), detail))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.record.error = f"{exc_type.__name__}: {exc}"
            return False
        failed = [c for c in self.record.checks[self._start:] if not c.passed]
        assert not failed, "; ".join(f"{c.label} ({c.detail})" for c in failed)
        return False


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}
    config.addinivalue_line("markers", "slow: long-running numerical runs")


@pytest.fixture
def acceptance(request):
    """``with acceptance("3") as c: c.check(label, ok, detail)``."""
    records = request.config.stash[ACCEPTANCE_KEY]

    def open_criterion(key):
        return Recorder(records.setdefault(key, CriterionRecord()))

    return open_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    records = config.stash.get(ACCEPTANCE_KEY, {})
    if not records:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key, title in CRITERIA.items():
        rec = records.get(key)
        if rec is None:
            tr.write_line(f"[NOT RUN] {key:>2}  {title}")
            continue
        tr.write_line(f"[{'PASS' if rec.passed else 'FAIL'}] {key:>2}  {title}")
        for c in rec.checks:
            mark = "ok " if c.passed else "BAD"
            tr.write_line(f"           {mark} {c.label}: {c.detail}")
        if rec.error:
            tr.write_line(f"           BAD error: {rec.error}")


# --------------------------------------------------------------------------
# Models
# --------------------------------------------------------------------------

@pytest.fixture(scope="session")
def linfrac_half():
    return load_model("builtin:linfrac_half")


@pytest.fixture(scope="session")
def poly776():
    return load_model("builtin:poly8_mean0776")


@pytest.fixture(scope="session")
def poly942():
    return load_model("builtin:poly8_mean0942")


@pytest.fixture(scope="session")
def poly98():
    return load_model("builtin:poly7_mean098")


@pytest.fixture(scope="session")
def linfrac2d():
    return load_model("builtin:linfrac2d_symmetric")


@pytest.fixture(scope="session")
def poly2d():
    return load_model("builtin:poly2d_random")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
