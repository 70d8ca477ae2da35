import numpy as np
import pytest

from slitcarpet.carpet import SlitSchedule, locate_in, make_point, slits_up_to


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_points(schedule: SlitSchedule, count: int, rng, exp: int = 10, double: bool = False):
    """Seeded tagged sample points, snapped to the 2^-exp grid."""
    pts = []
    scale = 1 << exp
    while len(pts) < count:
        xi = int(rng.integers(0, scale + 1))
        yi = int(rng.integers(0, scale + 1))
        from slitcarpet.dyadic import Dyadic

        x, y = Dyadic(xi, exp), Dyadic(yi, exp)
        loc = locate_in(schedule, x, y)
        side = None
        if loc.needs_side:
            side = "L" if rng.integers(0, 2) == 0 else "R"
        copy = None
        if double:
            p_probe = make_point(x, y, schedule, side=side)
            if not p_probe.on_seam():
                copy = "F" if rng.integers(0, 2) == 0 else "B"
        pts.append(make_point(x, y, schedule, side=side, copy=copy, double=double))
    return pts
