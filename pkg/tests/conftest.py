import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pantolab import Discrete, LogNormal, ModelSpec, load_model  # noqa: E402

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

E_LAW_ATOMS = ((math.e, 0.75), (math.exp(-1), 0.25))


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture
def half_double():
    """kappa = 0, v = lam = 1 with alpha in {2, 1/2} equally likely."""
    return load_model(CONFIGS / "two_point_q2.json")


@pytest.fixture
def e_model():
    return ModelSpec(kappa=0.0, v=1.0, lam=1.0, jump_law=Discrete(E_LAW_ATOMS))


@pytest.fixture
def lognormal_diffusive():
    return ModelSpec(kappa=0.8, v=0.3, lam=1.5, jump_law=LogNormal(0.2, 0.4))


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if acceptance_report.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_report.RESULTS):
            terminalreporter.write_line(acceptance_report.RESULTS[n])
