import sys
from fractions import Fraction
from pathlib import Path

import pytest

from demvar import AnalysisConfig, parse_model

CORPUS = Path(__file__).resolve().parent.parent / "src" / "demvar" / "corpus"

FLOAT = AnalysisConfig()
EXACT = AnalysisConfig(exact=True)

WEIGHTED = ["fig1_m", "fig1_n", "fig2a", "fig2b", "fig2c", "fig2d"]
REWARD = ["tm1", "acc_memory", "acc_fig1n", "acc_geom"]


def load(name):
    return parse_model((CORPUS / f"{name}.mdp").read_text())


def F(x):
    return Fraction(x)


@pytest.fixture(params=[FLOAT, EXACT], ids=["double", "rational"])
def config(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
