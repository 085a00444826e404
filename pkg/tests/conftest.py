import os
import tempfile
from pathlib import Path

# must run before fracivp.logger creates its singleton
os.environ.setdefault("FRAC_IVP_LOG_DIR", tempfile.mkdtemp(prefix="frac-ivp-logs-"))

import pytest  # noqa: E402

from fracivp.problem import ProblemSpec  # noqa: E402

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "assets" / "problems"


@pytest.fixture
def problems_dir():
    return PROBLEMS_DIR


@pytest.fixture
def constant_spec():
    """sigma = 1.5, b = 1, g = 1 on [0, 0.5]; the window is the whole horizon."""
    return ProblemSpec.from_text(sigma=1.5, b=1.0, T=0.5, g="1", r1=5.0, r2=5.0, name="constant_g")


@pytest.fixture
def mittag_leffler_spec():
    """D^1.5 w = w, w(0) = 0, D^0.5 w(0) = 1 on [0, 0.8]."""
    return ProblemSpec.from_text(sigma=1.5, b=1.0, T=0.8, g="x^0.5 * w", r1=2.0, r2=100.0,
                                 name="mittag_leffler")


@pytest.fixture
def nagumo_spec():
    return ProblemSpec.from_text(sigma=1.5, b=1.0, T=1.0, g="0.2 * w", r1=5.0, r2=5.0,
                                 name="nagumo")


@pytest.fixture
def write_problem(tmp_path):
    """Write problem-file text to a temporary path."""
    def _write(text, name="problem.json"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
