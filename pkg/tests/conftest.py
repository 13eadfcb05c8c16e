import pytest

from heptapile import build_ball

_BALLS = {}


@pytest.fixture(scope="session")
def ball_cache():
    """Shared immutable balls; construction dominates test time otherwise."""
    def get(m: int):
        if m not in _BALLS:
            _BALLS[m] = build_ball(m)
        return _BALLS[m]
    return get
