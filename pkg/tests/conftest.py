import pytest

from gapfield.config import GapConfig
from gapfield.solver import solve

_CACHE = {}


@pytest.fixture(scope="session")
def solved():
    """Session-wide cache of linear-field solutions keyed by (eps, tol)."""

    def get(eps, tol=1e-8):
        key = (eps, tol)
        if key not in _CACHE:
            _CACHE[key] = solve(GapConfig(epsilon=eps, tol=tol))
        return _CACHE[key]

    return get
