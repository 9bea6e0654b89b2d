from dataclasses import dataclass
from typing import ClassVar

import pytest

from cdrm.aggregate import PortfolioModel
from cdrm.copula import ArchimedeanCopula, Clayton
from cdrm.distortion import Distortion, PowerCopula, PowerTail
from cdrm.margins import Pareto

ACCEPTANCE_LINES: list[str] = []


@dataclass(frozen=True)
class Square(Distortion):
    """Convex control distortion ``s**2`` (not admissible for coherence)."""

    family: ClassVar[str] = "square"

    def _eval(self, s):
        return s * s

    def _deriv(self, s):
        return 2 * s

    def _deriv2(self, s):
        return 2 + 0 * s

    @property
    def tail_exponent(self):
        return 2.0

    @property
    def params(self):
        return {}


def pareto_model(theta=1.5, rho=1.2, delta=None, psi=None):
    """Two Pareto losses (tail indices 3 and 5) joined by a Clayton copula."""
    gamma = None if delta is None else PowerCopula(1.0 / delta)
    return PortfolioModel((Pareto(1 / 3), Pareto(1 / 5)), ArchimedeanCopula(Clayton(theta)),
                          psi or PowerTail(1.0 / rho), gamma)


@pytest.fixture
def model():
    return pareto_model()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
