import itertools

import pytest

from slitcarpet.carpet import (
    CarpetPoint,
    SlitSchedule,
    StripPoint,
    fold,
    locate,
    make_point,
    project,
    slits_up_to,
    unfold,
)
from slitcarpet.dyadic import Dyadic


def test_level_one_slit():
    sched = slits_up_to(1)
    assert len(sched) == 1
    s = sched.slits[0]
    assert s.x == Dyadic(1, 1)
    assert s.y_lo == Dyadic(1, 2)
    assert s.y_hi == Dyadic(3, 2)


def test_level_zero_empty():
    assert len(slits_up_to(0)) == 0


def test_level_three_count():
    assert len(slits_up_to(3)) == 21  # 1 + 4 + 16


@pytest.mark.parametrize("k", range(1, 9))
def test_generation_counts(k):
    sched = slits_up_to(k)
    count = sum(1 for s in sched if s.generation == k)
    assert count == 4 ** (k - 1)


def test_slit_lengths_and_invariants():
    for s in slits_up_to(4):
        k = s.generation
        assert s.y_hi - s.y_lo == Dyadic(1, k)
        assert s.x.num % 2 == 1 and s.x.exp == k


def test_closed_slits_pairwise_disjoint_level8():
    # same x-line is the only way to collide; exact dyadic interval checks
    sched = slits_up_to(8)
    by_x = {}
    for s in sched:
        by_x.setdefault((s.x.num, s.x.exp), []).append(s)
    for slits in by_x.values():
        slits = sorted(slits, key=lambda s: float(s.y_lo))
        for a, b in zip(slits, slits[1:]):
            assert a.y_hi < b.y_lo  # closed intervals disjoint


def test_one_generation_per_line_level8():
    sched = slits_up_to(8)
    for s in sched:
        assert s.generation == s.x.exp
    # non-dyadic x cannot host slits: slit x always has exponent >= 1
    assert sched.slits_at_x(Dyadic(1, 0)) == []


def test_locate_classification():
    assert locate(Dyadic(1, 1), Dyadic(1, 1), 1).kind == "slit"
    assert locate(Dyadic(1, 1), Dyadic(1, 2), 1).kind == "tip"
    assert locate(1 / 3, 1 / 3, 6).kind == "interior"
    assert locate(Dyadic(0), Dyadic(1, 1), 3).kind == "boundary"
    with pytest.raises(ValueError):
        locate(2.0, 0.5, 1)


def test_make_point_gatekeeping():
    with pytest.raises(ValueError):
        make_point(Dyadic(1, 1), Dyadic(1, 1), 1)  # in-slit, no side
    with pytest.raises(ValueError):
        make_point(Dyadic(1, 2), Dyadic(1, 2), 1, side="L")  # not in slit
    p = make_point(Dyadic(1, 1), Dyadic(1, 1), 1, side="L")
    assert p.side == "L"
    with pytest.raises(ValueError):
        make_point(Dyadic(1, 2), Dyadic(1, 2), 1, copy="F")  # copy needs double
    with pytest.raises(ValueError):
        make_point(Dyadic(1, 2), Dyadic(1, 2), 1, double=True)  # off-seam needs copy
    # seam points drop the copy tag
    q = make_point(Dyadic(0), Dyadic(1, 2), 1, copy="F", double=True)
    assert q.copy is None


def test_project_drops_fine_tags():
    p = make_point(Dyadic(1, 1), Dyadic(1, 1), 1, side="L")
    q = project(p, 1, 0)
    assert q.side is None and q.x == p.x and q.y == p.y
    assert project(p, 1, 1) == p
    p2 = make_point(Dyadic(1, 2), Dyadic(1, 2), 2, side="R")
    assert project(p2, 2, 1).side is None
    with pytest.raises(ValueError):
        project(p, 1, 2)


def test_project_composition_on_tagged_points():
    sched = slits_up_to(4)
    pts = []
    for s in sched:
        mid = (s.y_lo + s.y_hi) * Dyadic(1, 1)
        pts.append(make_point(s.x, mid, 4, side="L"))
        pts.append(make_point(s.x, mid, 4, side="R"))
    for p in pts:
        for m, l, n in itertools.combinations(range(5), 3):
            assert project(project(p, n, l), l, m) == project(p, n, m)


def test_fold_examples():
    p = fold(StripPoint(Dyadic(3, 2), Dyadic(5, 2)))
    assert p.copy == "B" and p.y == Dyadic(3, 2)
    p = fold(StripPoint(Dyadic(1, 2), Dyadic(0)))
    assert p.copy is None and p.y == 0
    p = fold(StripPoint(Dyadic(1, 2), Dyadic(2)))
    assert p.copy is None and p.y == 0


def test_fold_unfold_roundtrip():
    for sheet in range(-4, 5):
        for num in range(1, 8):
            y = Dyadic(num, 3)
            copy = "F" if sheet % 2 == 0 else "B"
            p = make_point(Dyadic(5, 3), y, 0, copy=copy, double=True)
            sp = unfold(p, sheet)
            assert sp.sheet == sheet
            assert fold(sp) == p


def test_unfold_parity_checked():
    p = make_point(Dyadic(5, 3), Dyadic(1, 3), 0, copy="F", double=True)
    with pytest.raises(ValueError):
        unfold(p, 1)


def test_schedule_roundtrip():
    sched = slits_up_to(3)
    lines = sched.export_lines()
    back = SlitSchedule.import_lines(lines)
    assert back.level == 3
    assert back.slits == sched.slits
