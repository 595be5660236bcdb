import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_circle, make_nonconvex_circle, make_thin


@pytest.fixture(autouse=True)
def _verify_every_lp_solve(monkeypatch):
    """Test mode: every optimal LP solution anywhere in the suite is checked
    against its bounds and cut pool post-hoc."""
    import gaugecut.lp as lp_mod
    import gaugecut.solve as solve_mod

    original = lp_mod.lp_solve

    def checked(m):
        sol = original(m)
        lp_mod.check_solution(m, sol)
        return sol

    monkeypatch.setattr(lp_mod, "lp_solve", checked)
    monkeypatch.setattr(solve_mod, "lp_solve", checked)


@pytest.fixture
def circle():
    return make_circle()


@pytest.fixture
def circle_no_interior():
    return make_circle(interior=False)


@pytest.fixture
def nonconvex_circle():
    return make_nonconvex_circle()


@pytest.fixture
def thin_problem():
    return make_thin()
