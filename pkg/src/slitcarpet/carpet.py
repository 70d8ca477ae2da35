"""Slit schedule of the carpet, tagged points, level projections, strip cover.

The level-n space is the completion of the open unit square minus all closed
vertical slits of generations 1..n; completing doubles every point strictly
inside a slit, which is what the side tag records.  The double glues two
copies (front/back) along the outer square, and its infinite cyclic cover is
a vertical strip of alternating copies; `fold`/`unfold` move between the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .dyadic import Dyadic, DyadicLike, as_dyadic

__all__ = [
    "LEFT",
    "RIGHT",
    "FRONT",
    "BACK",
    "Slit",
    "SlitSchedule",
    "slits_up_to",
    "CarpetPoint",
    "make_point",
    "Location",
    "locate",
    "project",
    "StripPoint",
    "fold",
    "unfold",
]

LEFT = "L"
RIGHT = "R"
FRONT = "F"
BACK = "B"

_SIDES = (LEFT, RIGHT)
_COPIES = (FRONT, BACK)


@dataclass(frozen=True, order=True)
class Slit:
    """Generation-k vertical slit, indexed by its subsquare cell (i, j).

    Lives at x = (2i+1)/2^k, open y-interval ((4j+1)/2^{k+1}, (4j+3)/2^{k+1});
    its length is exactly 2^{-k}.
    """

    generation: int
    i: int
    j: int

    def __post_init__(self):
        k = self.generation
        if k < 1:
            raise ValueError("slit generation must be >= 1")
        cells = 1 << (k - 1)
        if not (0 <= self.i < cells and 0 <= self.j < cells):
            raise ValueError(f"cell index out of range for generation {k}")

    @property
    def x(self) -> Dyadic:
        return Dyadic(2 * self.i + 1, self.generation)

    @property
    def y_lo(self) -> Dyadic:
        return Dyadic(4 * self.j + 1, self.generation + 1)

    @property
    def y_hi(self) -> Dyadic:
        return Dyadic(4 * self.j + 3, self.generation + 1)

    @property
    def length(self) -> Dyadic:
        return Dyadic(1, self.generation)

    def contains_open(self, y: DyadicLike) -> bool:
        y = as_dyadic(y)
        return self.y_lo < y < self.y_hi

    def is_tip(self, y: DyadicLike) -> bool:
        y = as_dyadic(y)
        return y == self.y_lo or y == self.y_hi


class SlitSchedule:
    """All slits of generations 1..level, in (generation, i, j) order."""

    def __init__(self, level: int, slits: Iterable[Slit] = ()):
        if level < 0:
            raise ValueError("level must be >= 0")
        self.level = level
        self.slits: list[Slit] = sorted(slits)
        for s in self.slits:
            if s.generation > level:
                raise ValueError(f"{s} exceeds schedule level {level}")
        # slits sharing an x-line, keyed by (numerator, exponent) of reduced x
        self._by_x: dict[tuple[int, int], list[Slit]] = {}
        for s in self.slits:
            x = s.x
            self._by_x.setdefault((x.num, x.exp), []).append(s)

    def __len__(self) -> int:
        return len(self.slits)

    def __iter__(self) -> Iterator[Slit]:
        return iter(self.slits)

    def slits_at_x(self, x: DyadicLike) -> list[Slit]:
        x = as_dyadic(x)
        return self._by_x.get((x.num, x.exp), [])

    def generation_at_x(self, x: DyadicLike) -> Optional[int]:
        """Generation of the slits on the line {x}, or None.

        Every slit at a given x-line has generation equal to the exponent of
        the reduced dyadic x, so one line meets slits of at most one
        generation.
        """
        slits = self.slits_at_x(x)
        return slits[0].generation if slits else None

    def slit_containing(self, x: DyadicLike, y: DyadicLike) -> Optional[Slit]:
        y = as_dyadic(y)
        for s in self.slits_at_x(x):
            if s.contains_open(y):
                return s
        return None

    # -- line-oriented exchange format: one "k i j" triple per line -----

    def export_lines(self) -> list[str]:
        return [f"{s.generation} {s.i} {s.j}" for s in self.slits]

    @classmethod
    def import_lines(cls, lines: Iterable[str], level: Optional[int] = None) -> "SlitSchedule":
        slits = []
        for ln in lines:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            k, i, j = (int(tok) for tok in ln.split())
            slits.append(Slit(k, i, j))
        lvl = level if level is not None else max((s.generation for s in slits), default=0)
        return cls(lvl, slits)


def slits_up_to(n: int) -> SlitSchedule:
    """Slits of generations 1..n; generation k contributes 4^{k-1} slits."""
    if n < 0:
        raise ValueError("level must be >= 0")
    slits = []
    for k in range(1, n + 1):
        cells = 1 << (k - 1)
        for i in range(cells):
            for j in range(cells):
                slits.append(Slit(k, i, j))
    return SlitSchedule(n, slits)


@dataclass(frozen=True)
class CarpetPoint:
    """Point of a level-n space or its double.

    `side` is present exactly when (x, y) lies strictly inside a slit's open
    interval at the ambient level; `copy` is present for off-seam points of
    the double.  Use `make_point` to construct with validation.
    """

    x: Dyadic
    y: Dyadic
    side: Optional[str] = None
    copy: Optional[str] = None

    def coords(self) -> tuple[float, float]:
        return (float(self.x), float(self.y))

    def untagged(self) -> "CarpetPoint":
        return CarpetPoint(self.x, self.y)

    def on_seam(self) -> bool:
        return self.x == 0 or self.x == 1 or self.y == 0 or self.y == 1

    def __str__(self) -> str:
        parts = [str(self.x), str(self.y)]
        if self.side:
            parts.append(self.side)
        if self.copy:
            parts.append(self.copy)
        return ",".join(parts)


@dataclass(frozen=True)
class Location:
    """Classification of planar coordinates against a schedule."""

    kind: str  # "interior" | "boundary" | "tip" | "slit"
    slit: Optional[Slit] = None

    @property
    def needs_side(self) -> bool:
        return self.kind == "slit"


def locate(x: DyadicLike, y: DyadicLike, n: int) -> Location:
    """Classify (x, y) at level n; rejects coordinates outside the square."""
    x, y = as_dyadic(x), as_dyadic(y)
    if not (0 <= x <= 1 and 0 <= y <= 1):
        raise ValueError(f"({x}, {y}) outside the unit square")
    schedule = slits_up_to(n) if not isinstance(n, SlitSchedule) else n
    return locate_in(schedule, x, y)


def locate_in(schedule: SlitSchedule, x: DyadicLike, y: DyadicLike) -> Location:
    x, y = as_dyadic(x), as_dyadic(y)
    if not (0 <= x <= 1 and 0 <= y <= 1):
        raise ValueError(f"({x}, {y}) outside the unit square")
    if x == 0 or x == 1 or y == 0 or y == 1:
        return Location("boundary")
    for s in schedule.slits_at_x(x):
        if s.contains_open(y):
            return Location("slit", s)
        if s.is_tip(y):
            return Location("tip", s)
    return Location("interior")


def make_point(
    x: DyadicLike,
    y: DyadicLike,
    level: int | SlitSchedule,
    side: Optional[str] = None,
    copy: Optional[str] = None,
    double: bool = False,
) -> CarpetPoint:
    """Validated construction; untagged in-slit points are an error."""
    schedule = level if isinstance(level, SlitSchedule) else slits_up_to(level)
    x, y = as_dyadic(x), as_dyadic(y)
    loc = locate_in(schedule, x, y)
    if loc.needs_side:
        if side not in _SIDES:
            raise ValueError(
                f"({x}, {y}) lies inside a generation-{loc.slit.generation} slit; "
                f"a side tag in {_SIDES} is required"
            )
    elif side is not None:
        raise ValueError(f"({x}, {y}) is not inside an open slit; side tag must be absent")
    p = CarpetPoint(x, y, side, copy)
    if double:
        if p.on_seam():
            if copy is not None:
                p = CarpetPoint(x, y, side, None)
        elif copy not in _COPIES:
            raise ValueError(f"off-seam double point ({x}, {y}) needs a copy tag in {_COPIES}")
    elif copy is not None:
        raise ValueError("copy tag only applies to points of the double")
    return p


def project(p: CarpetPoint, n: int, m: int) -> CarpetPoint:
    """Level projection pi_{mn}: drop the side tag iff its slit collapses.

    Coordinates are unchanged; the tag survives exactly when the slit it
    refers to already exists at level m.  Requires m <= n.
    """
    if m > n:
        raise ValueError(f"cannot project upward: m={m} > n={n}")
    if p.side is None:
        return p
    generation = p.x.exp  # one generation per line
    if generation <= m:
        return p
    return CarpetPoint(p.x, p.y, None, p.copy)


@dataclass(frozen=True)
class StripPoint:
    """Point of the infinite-strip cover; sheet k is y in [k, k+1]."""

    x: Dyadic
    y: Dyadic
    side: Optional[str] = None

    @property
    def sheet(self) -> int:
        # Python's >> floors for negative ints, which is exactly floor(y)
        return self.y.num >> self.y.exp


def fold(s: StripPoint, level: int | SlitSchedule = 0, double: bool = True) -> CarpetPoint:
    """Project a strip point to the double: even sheets hit the front copy.

    y is reduced modulo 2; values in [0,1] land on the front copy with that
    y, values in [1,2] on the back copy with y' = 2 - (y mod 2).  Side tags
    ride along unchanged since x is fixed.
    """
    if not (0 <= s.x <= 1):
        raise ValueError("strip x must lie in [0, 1]")
    two = Dyadic(2)
    # exact reduction mod 2: floor(y/2) via arithmetic shift
    sheet_pair = s.y.num >> (s.y.exp + 1)
    y = s.y - two * Dyadic(sheet_pair)
    if y <= 1:
        copy, y_c = FRONT, y
    else:
        copy, y_c = BACK, two - y
    schedule = level if isinstance(level, SlitSchedule) else slits_up_to(level)
    return make_point(s.x, y_c, schedule, side=s.side, copy=copy, double=double)


def unfold(p: CarpetPoint, sheet: int) -> StripPoint:
    """Inverse of fold onto the given sheet; sheet parity must match the copy."""
    even = sheet % 2 == 0
    if p.copy == FRONT and not even:
        raise ValueError("front-copy points unfold to even sheets")
    if p.copy == BACK and even:
        raise ValueError("back-copy points unfold to odd sheets")
    if even:
        y = p.y + Dyadic(sheet)
    else:
        y = Dyadic(sheet + 1) - p.y
    return StripPoint(p.x, y, p.side)
