import math

import numpy as np
import pytest

from slitcarpet.carpet import CarpetPoint, make_point, project, slits_up_to
from slitcarpet.dyadic import Dyadic
from slitcarpet.geodesics import (
    ball_distances,
    distance_level,
    distance_limit,
    is_vertical,
    level_engine,
    distance_double,
)

from conftest import random_points

D = Dyadic


def P(x, y, side=None, level=0, copy=None, double=False):
    return make_point(x, y, level, side=side, copy=copy, double=double)


class TestDistanceLevel:
    def test_convex_square_diagonal(self):
        d, path = distance_level(0, P(D(0), D(0)), P(D(1), D(1)))
        assert d == pytest.approx(math.sqrt(2), abs=1e-15)
        assert len(path.vertices) == 2

    def test_doubled_center_exactly_half(self):
        p = P(D(1, 1), D(1, 1), side="L", level=1)
        q = P(D(1, 1), D(1, 1), side="R", level=1)
        d, path = distance_level(1, p, q)
        assert d == 0.5  # exact: 1/4 + 1/4 in binary floats
        mids = path.vertices[1:-1]
        assert all(v.y in (D(1, 2), D(3, 2)) for v in mids)

    def test_around_slit_sqrt2_over_2(self):
        p = P(D(1, 2), D(1, 1), level=1)
        q = P(D(3, 2), D(1, 1), level=1)
        d, path = distance_level(1, p, q)
        assert d == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
        assert len(path.vertices) == 3  # bends at one tip

    def test_same_side_straight_run(self):
        p = P(D(1, 1), D(3, 3), side="L", level=1)
        q = P(D(1, 1), D(5, 3), side="L", level=1)
        d, _ = distance_level(1, p, q)
        assert d == pytest.approx(0.25, abs=1e-15)

    def test_symmetry_and_triangle(self, rng):
        for n in (1, 2, 3):
            sched = slits_up_to(n)
            pts = random_points(sched, 30, rng)
            for a, b, c in zip(pts[::3], pts[1::3], pts[2::3]):
                dab, _ = distance_level(n, a, b)
                dba, _ = distance_level(n, b, a)
                assert dab == pytest.approx(dba, abs=1e-12)
                dbc, _ = distance_level(n, b, c)
                dac, _ = distance_level(n, a, c)
                assert dac <= dab + dbc + 1e-12

    def test_rejects_stale_tags(self):
        p = CarpetPoint(D(1, 1), D(1, 1))  # in-slit but untagged
        with pytest.raises(ValueError):
            distance_level(1, p, P(D(0), D(0)))
        q = CarpetPoint(D(1, 2), D(1, 2), side="L")  # tagged but not in slit
        with pytest.raises(ValueError):
            distance_level(1, q, P(D(0), D(0)))

    def test_projection_is_one_lipschitz(self, rng):
        for n in (2, 3):
            sched = slits_up_to(n)
            pts = random_points(sched, 20, rng)
            for a, b in zip(pts[::2], pts[1::2]):
                dn, _ = distance_level(n, a, b)
                for m in range(n):
                    dm, _ = distance_level(m, project(a, n, m), project(b, n, m))
                    assert dm <= dn + 1e-12

    def test_paths_bend_only_at_tips(self, rng):
        n = 3
        sched = slits_up_to(n)
        tipset = {(s.x, y) for s in sched for y in (s.y_lo, s.y_hi)}
        pts = random_points(sched, 20, rng)
        for a, b in zip(pts[::2], pts[1::2]):
            _, path = distance_level(n, a, b)
            for v in path.vertices[1:-1]:
                assert (v.x, v.y) in tipset


class TestDistanceLimit:
    def test_diagonal_monotone_bounded(self):
        seq = distance_limit(P(D(0), D(0)), P(D(1), D(1)), 4)
        ds = seq.distances()
        assert ds[0] == pytest.approx(math.sqrt(2), abs=1e-15)
        assert all(b >= a - 1e-12 for a, b in zip(ds, ds[1:]))
        assert all(d <= 3 for d in ds)

    def test_same_point_zero(self):
        seq = distance_limit(P(D(1, 3), D(1, 3)), P(D(1, 3), D(1, 3)), 3)
        assert all(d == 0 for d in seq.distances())

    def test_horizontal_midline(self):
        p = P(D(0), D(1, 1))
        q = P(D(1), D(1, 1))
        seq = distance_limit(p, q, 4)
        ds = seq.distances()
        assert ds[0] == 1.0
        assert ds[1] == pytest.approx(2 * math.hypot(0.5, 0.25), abs=1e-15)
        assert all(b >= a - 1e-12 for a, b in zip(ds, ds[1:]))
        assert seq.gap >= 0


class TestVertical:
    def test_vertical_segment(self):
        path_d, path = distance_level(0, P(1 / 3, D(0)), P(1 / 3, D(1)))
        assert is_vertical(path)
        assert path_d == pytest.approx(1.0, abs=1e-15)

    def test_diagonal_not_vertical(self):
        _, path = distance_level(0, P(D(0), D(0)), P(D(1), D(1)))
        assert not is_vertical(path)

    def test_slit_side_run_is_vertical(self):
        p = P(D(1, 1), D(3, 3), side="L", level=1)
        q = P(D(1, 1), D(5, 3), side="L", level=1)
        _, path = distance_level(1, p, q)
        assert is_vertical(path)


class TestDouble:
    def test_seam_identification_zero(self):
        p = P(D(1, 1), D(0), level=1, copy="F", double=True)
        q = P(D(1, 1), D(0), level=1, copy="B", double=True)
        d, _ = distance_double(1, p, q)
        assert d == 0.0

    def test_distinct_copies_positive(self):
        p = P(D(1, 1), D(1, 1), level=0, copy="F", double=True)
        q = P(D(1, 1), D(1, 1), level=0, copy="B", double=True)
        d, _ = distance_double(0, p, q)
        assert d == pytest.approx(1.0, abs=1e-12)  # out-and-back via a side
        p2 = P(D(1, 2), D(1, 2), level=1, copy="F", double=True)
        q2 = P(D(1, 2), D(1, 2), level=1, copy="B", double=True)
        d2, _ = distance_double(1, p2, q2)
        assert d2 == pytest.approx(0.5, abs=1e-12)  # nearest seam at distance 1/4

    def test_same_copy_matches_level(self, rng):
        n = 2
        sched = slits_up_to(n)
        pts = random_points(sched, 10, rng)
        for a, b in zip(pts[::2], pts[1::2]):
            da, _ = distance_level(n, a, b)
            aa = make_point(a.x, a.y, sched, side=a.side, copy=None if a.on_seam() else "F", double=True)
            bb = make_point(b.x, b.y, sched, side=b.side, copy=None if b.on_seam() else "F", double=True)
            dd, _ = distance_double(n, aa, bb)
            assert dd == pytest.approx(da, abs=1e-12)

    def test_cross_copy_vs_seam_bruteforce(self):
        n = 1
        p = P(D(1, 1), D(1, 1), side="L", level=n, copy="F", double=True)
        q = P(D(1, 1), D(1, 1), side="L", level=n, copy="B", double=True)
        d, path = distance_double(n, p, q)
        # brute force: best single crossing over densely sampled seam points
        best = np.inf
        samples = []
        m = 512
        for k in range(m + 1):
            t = D(k, 9)
            samples += [(t, D(0)), (t, D(1)), (D(0), t), (D(1), t)]
        for (sx, sy) in samples:
            z = make_point(sx, sy, n)
            d1, _ = distance_level(n, CarpetPoint(p.x, p.y, p.side), z)
            d2, _ = distance_level(n, z, CarpetPoint(q.x, q.y, q.side))
            best = min(best, d1 + d2)
        assert d <= best + 1e-12
        assert d == pytest.approx(best, abs=2 / m)
        copies = {v.copy for v in path.vertices}
        assert "F" in copies and "B" in copies

    def test_cross_copy_symmetric(self, rng):
        n = 2
        sched = slits_up_to(n)
        pts = random_points(sched, 12, rng, double=True)
        pairs = [(a, b) for a, b in zip(pts[::2], pts[1::2])]
        for a, b in pairs:
            dab, _ = distance_double(n, a, b)
            dba, _ = distance_double(n, b, a)
            assert dab == pytest.approx(dba, abs=1e-12)


class TestGridOracle:
    def test_axis_aligned_exact_no_slits(self):
        p = P(D(1, 1), D(1, 1))
        field = ball_distances(0, p, np.inf, D(1, 7))
        g = field.graph
        nid = g.node_id(P(D(1), D(1, 1)))
        assert field.dist[nid] == pytest.approx(0.5, abs=1e-12)
        nid = g.node_id(P(D(1, 1), D(1)))
        assert field.dist[nid] == pytest.approx(0.5, abs=1e-12)

    def test_matches_exact_on_random_pairs_small(self, rng):
        n, g = 1, 8
        sched = slits_up_to(n)
        field_cache = {}
        pts = random_points(sched, 12, rng, exp=g)
        src, targets = pts[0], pts[1:]
        field = ball_distances(n, src, np.inf, D(1, g))
        for t in targets:
            exact, _ = distance_level(n, src, t)
            approx = field.dist[field.graph.node_id(t)]
            assert approx >= exact - 1e-12  # grid paths are genuine paths
            assert approx - exact <= 2 * field.graph.step

    def test_slit_duplicates_differ_by_detour(self):
        n, g = 1, 8
        pl = P(D(1, 1), D(1, 1), side="L", level=n)
        pr = P(D(1, 1), D(1, 1), side="R", level=n)
        field = ball_distances(n, pl, np.inf, D(1, g))
        dl = field.dist[field.graph.node_id(pl)]
        dr = field.dist[field.graph.node_id(pr)]
        assert dl == 0.0
        assert dr == pytest.approx(0.5, abs=2 * field.graph.step)

    def test_big_radius_covers_everything(self):
        p = P(D(1, 2), D(1, 2))
        field = ball_distances(0, p, 3.5, D(1, 6))
        assert np.all(np.isfinite(field.dist))
        assert field.mass_within(3.5) == pytest.approx(1.0, abs=1e-12)

    def test_misaligned_grid_rejected(self):
        with pytest.raises(ValueError):
            ball_distances(2, P(D(1, 2), D(1, 2), side="L", level=2), 1.0, D(1, 2))
        with pytest.raises(ValueError):
            ball_distances(1, P(D(1, 2), D(1, 4)), 1.0, 0.3)
