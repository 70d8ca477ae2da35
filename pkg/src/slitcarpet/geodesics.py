"""Exact geodesics of the slit square and its double, plus the grid oracle.

Geometry used throughout:

- A shortest path among vertical slit obstacles bends only at slit tips, so
  the visibility graph over the tips plus the two query endpoints computes
  the path metric exactly (the outer square is convex and needs no nodes).
- A segment is blocked only when it crosses the open interior of a slit
  transversally.  Touching a tip is allowed, and collinear overlap along a
  slit line is allowed on either side; the one extra rule is that a segment
  may not join the two sides of the same slit without passing a tip, and a
  tagged in-slit endpoint must depart into the half-plane of its tag.
- The double of the square unfolds across each seam side into a mirror
  obstacle field.  The developed obstacle tiling is invariant under every
  seam reflection, so reflecting the tail of a developed path at its last
  crossing removes one crossing without changing length or the folded image.
  Hence same-copy pairs are realized in-copy and cross-copy pairs by exactly
  one crossing: the distance is the minimum over the four single-crossing
  unfoldings.

Predicates are exact: all slit data and any query point whose dyadic
exponent fits the working scale are compared in scaled int64 arithmetic;
other (generic float) points fall back to float tests with a 1e-12 epsilon.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .carpet import (
    BACK,
    FRONT,
    LEFT,
    RIGHT,
    CarpetPoint,
    SlitSchedule,
    locate_in,
    project,
    slits_up_to,
)
from .dyadic import Dyadic, as_dyadic

__all__ = [
    "Polyline",
    "distance_level",
    "distance_double",
    "distance_limit",
    "LimitSequence",
    "is_vertical",
    "ball_distances",
    "GridDistanceField",
    "default_stencil_radius",
    "level_engine",
    "double_engine",
    "grid_graph",
]

_SCALE = 28  # coordinates with dyadic exponent <= _SCALE use exact int64 tests
_EPS = 1e-12


@dataclass(frozen=True)
class Polyline:
    """Geodesic polyline; length is the sum of Euclidean segment lengths."""

    vertices: tuple[CarpetPoint, ...]
    length: float

    @classmethod
    def from_vertices(cls, vertices: Sequence[CarpetPoint]) -> "Polyline":
        total = 0.0
        for a, b in zip(vertices, vertices[1:]):
            ax, ay = a.coords()
            bx, by = b.coords()
            total += float(np.hypot(bx - ax, by - ay))
        return cls(tuple(vertices), total)

    def export_lines(self) -> list[str]:
        out = []
        for v in self.vertices:
            parts = [repr(float(v.x)), repr(float(v.y))]
            if v.side:
                parts.append(v.side)
            if v.copy:
                parts.append(v.copy)
            out.append(" ".join(parts))
        return out


def is_vertical(path: Polyline) -> bool:
    """True iff every vertex shares one x (exact dyadic comparison)."""
    if not path.vertices:
        return True
    x0 = path.vertices[0].x
    return all(v.x == x0 for v in path.vertices[1:])


# ---------------------------------------------------------------------------
# obstacle and node arrays


def _int_at_scale(d: Dyadic) -> Optional[int]:
    if d.exp <= _SCALE:
        return d.num << (_SCALE - d.exp)
    return None


class _Obstacles:
    """Vertical open segments as parallel arrays (floats + scaled ints)."""

    def __init__(self, triples: Sequence[tuple[Dyadic, Dyadic, Dyadic]]):
        self.count = len(triples)
        self.xs = np.array([float(t[0]) for t in triples])
        self.lo = np.array([float(t[1]) for t in triples])
        self.hi = np.array([float(t[2]) for t in triples])
        self.xs_i = np.array([_int_at_scale(t[0]) for t in triples], dtype=np.int64)
        self.lo_i = np.array([_int_at_scale(t[1]) for t in triples], dtype=np.int64)
        self.hi_i = np.array([_int_at_scale(t[2]) for t in triples], dtype=np.int64)


class _Nodes:
    """Graph nodes: coordinates, slit membership/side, and exactness flags."""

    def __init__(self):
        self.xf: list[float] = []
        self.yf: list[float] = []
        self.xi: list[int] = []
        self.yi: list[int] = []
        self.ok: list[bool] = []
        self.slit: list[int] = []  # obstacle index the node lies strictly inside, or -1
        self.side: list[int] = []  # -1 left, +1 right, 0 untagged
        self.points: list[CarpetPoint] = []  # folded carpet point for output

    def add(self, x: Dyadic, y: Dyadic, slit: int, side: int, point: CarpetPoint) -> int:
        xi, yi = _int_at_scale(x), _int_at_scale(y)
        ok = xi is not None and yi is not None
        self.xf.append(float(x))
        self.yf.append(float(y))
        self.xi.append(xi if ok else 0)
        self.yi.append(yi if ok else 0)
        self.ok.append(ok)
        self.slit.append(slit)
        self.side.append(side)
        self.points.append(point)
        return len(self.xf) - 1

    def freeze(self):
        self.xf = np.asarray(self.xf)
        self.yf = np.asarray(self.yf)
        self.xi = np.asarray(self.xi, dtype=np.int64)
        self.yi = np.asarray(self.yi, dtype=np.int64)
        self.ok = np.asarray(self.ok, dtype=bool)
        self.slit = np.asarray(self.slit, dtype=np.int64)
        self.side = np.asarray(self.side, dtype=np.int64)
        return self


def _visible_from(nodes: _Nodes, a: int, obs: _Obstacles, idx: np.ndarray) -> np.ndarray:
    """Visibility of node a against nodes[idx], vectorized over idx."""
    exact = bool(nodes.ok[a]) and bool(np.all(nodes.ok[idx]))
    if exact:
        ux, uy = int(nodes.xi[a]), int(nodes.yi[a])
        vx, vy = nodes.xi[idx], nodes.yi[idx]
        sx, slo, shi = obs.xs_i, obs.lo_i, obs.hi_i
    else:
        ux, uy = float(nodes.xf[a]), float(nodes.yf[a])
        vx, vy = nodes.xf[idx], nodes.yf[idx]
        sx, slo, shi = obs.xs, obs.lo, obs.hi
    dx = vx - ux
    dy = vy - uy
    vert = dx == 0 if exact else np.abs(dx) <= _EPS

    vis = np.ones(len(idx), dtype=bool)

    # same slit, both strictly inside, opposite sides: no straight join
    u_slit, u_side = int(nodes.slit[a]), int(nodes.side[a])
    if u_side != 0:
        same = (nodes.slit[idx] == u_slit) & (nodes.side[idx] == -u_side)
        vis &= ~(vert & same)
        # tagged departure: non-vertical segments must leave into the tag's side
        if u_side < 0:
            vis &= vert | (dx < 0)
        else:
            vis &= vert | (dx > 0)
    v_side = nodes.side[idx]
    tagged = v_side != 0
    if np.any(tagged):
        # departure seen from the tagged v: left-face points see only x < vx
        leave_ok = np.where(v_side < 0, dx > 0, dx < 0)
        vis &= ~tagged | vert | leave_ok

    if obs.count == 0 or not np.any(vis & ~vert):
        return vis

    # transversal crossings of open slit interiors (outer product over slits)
    DX = dx[:, None]
    lo_x = np.minimum(ux, vx)[:, None]
    hi_x = np.maximum(ux, vx)[:, None]
    between = (lo_x < sx[None, :]) & (sx[None, :] < hi_x)
    w = uy * DX + (sx[None, :] - ux) * dy[:, None]
    a_lo = w - slo[None, :] * DX
    a_hi = shi[None, :] * DX - w
    sgn = np.sign(DX)
    if exact:
        inside = (a_lo * sgn > 0) & (a_hi * sgn > 0)
    else:
        inside = (a_lo * sgn > _EPS) & (a_hi * sgn > _EPS)
    blocked = np.any(between & inside, axis=1)
    return vis & ~blocked


def _node_key(nodes: _Nodes, i: int) -> tuple:
    p = nodes.points[i]
    return (nodes.xf[i], nodes.yf[i], p.side or "", p.copy or "")


def _dijkstra_lex(
    nodes: _Nodes, weights: np.ndarray, adjacency: np.ndarray, src: int, dst: int
) -> tuple[float, list[int]]:
    """Shortest path with deterministic tie-break (fewer vertices, then keys)."""
    n = len(nodes.xf)
    best: dict[int, tuple] = {}
    start_key = (0.0, 1, (_node_key(nodes, src),))
    heap = [(0.0, 1, (_node_key(nodes, src),), src, (src,))]
    best[src] = start_key[:3]
    while heap:
        d, nv, keyseq, u, path = heapq.heappop(heap)
        if u == dst:
            return d, list(path)
        if best.get(u, None) is not None and (d, nv, keyseq) > best[u]:
            continue
        row = adjacency[u]
        for v in np.nonzero(row)[0]:
            v = int(v)
            nd = d + weights[u, v]
            cand = (nd, nv + 1, keyseq + (_node_key(nodes, v),))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (nd, nv + 1, cand[2], v, path + (v,)))
    return float("inf"), []


# ---------------------------------------------------------------------------
# level engines (single copy)


class LevelEngine:
    """Static visibility graph over the tips of one schedule."""

    def __init__(self, schedule: SlitSchedule, obstacles: Optional[_Obstacles] = None,
                 tip_points: Optional[list[tuple[Dyadic, Dyadic, int, CarpetPoint]]] = None):
        self.schedule = schedule
        if obstacles is None:
            triples = [(s.x, s.y_lo, s.y_hi) for s in schedule]
            obstacles = _Obstacles(triples)
            tip_points = []
            for si, s in enumerate(schedule):
                for y in (s.y_lo, s.y_hi):
                    tip_points.append((s.x, y, si, CarpetPoint(s.x, y)))
        self.obs = obstacles
        nodes = _Nodes()
        for (x, y, si, pt) in tip_points:
            nodes.add(x, y, si, 0, pt)
        self.tips = nodes.freeze()
        self.n_tips = len(self.tips.xf)
        t = self.n_tips
        vis = np.zeros((t, t), dtype=bool)
        for a in range(t):
            idx = np.arange(a + 1, t)
            if len(idx):
                v = _visible_from(self.tips, a, self.obs, idx)
                vis[a, a + 1:] = v
                vis[a + 1:, a] = v
        self.tip_vis = vis
        dxm = self.tips.xf[:, None] - self.tips.xf[None, :]
        dym = self.tips.yf[:, None] - self.tips.yf[None, :]
        self.tip_w = np.hypot(dxm, dym)

    def _with_queries(self, pts: list[tuple[Dyadic, Dyadic, int, int, CarpetPoint]]):
        nodes = _Nodes()
        for i in range(self.n_tips):
            nodes.xf.append(float(self.tips.xf[i]))
            nodes.yf.append(float(self.tips.yf[i]))
            nodes.xi.append(int(self.tips.xi[i]))
            nodes.yi.append(int(self.tips.yi[i]))
            nodes.ok.append(bool(self.tips.ok[i]))
            nodes.slit.append(int(self.tips.slit[i]))
            nodes.side.append(int(self.tips.side[i]))
            nodes.points.append(self.tips.points[i])
        for (x, y, slit, side, pt) in pts:
            nodes.add(x, y, slit, side, pt)
        nodes.freeze()
        n = len(nodes.xf)
        vis = np.zeros((n, n), dtype=bool)
        vis[: self.n_tips, : self.n_tips] = self.tip_vis
        for a in range(self.n_tips, n):
            idx = np.arange(0, a)
            v = _visible_from(nodes, a, self.obs, idx)
            vis[a, :a] = v
            vis[:a, a] = v
        w = np.hypot(nodes.xf[:, None] - nodes.xf[None, :], nodes.yf[:, None] - nodes.yf[None, :])
        return nodes, vis, w

    def query_node(self, p: CarpetPoint) -> tuple[Dyadic, Dyadic, int, int, CarpetPoint]:
        loc = locate_in(self.schedule, p.x, p.y)
        if loc.needs_side != (p.side is not None):
            raise ValueError(f"stale or invalid side tag on {p} at level {self.schedule.level}")
        slit_idx = -1
        side = 0
        if p.side is not None:
            slit_idx = self.schedule.slits.index(loc.slit)
            side = -1 if p.side == LEFT else 1
        return (p.x, p.y, slit_idx, side, p)

    def distance(self, p: CarpetPoint, q: CarpetPoint) -> tuple[float, Polyline]:
        if p == q:
            return 0.0, Polyline.from_vertices([p])
        nodes, vis, w = self._with_queries([self.query_node(p), self.query_node(q)])
        src, dst = self.n_tips, self.n_tips + 1
        d, path = _dijkstra_lex(nodes, w, vis, src, dst)
        return d, Polyline.from_vertices([nodes.points[i] for i in path])

    def tip_distances(self, p: CarpetPoint) -> tuple["_Nodes", np.ndarray]:
        """Distances from p to every tip (plain Dijkstra; used by field queries)."""
        nodes, vis, w = self._with_queries([self.query_node(p)])
        n = len(nodes.xf)
        dist = np.full(n, np.inf)
        src = self.n_tips
        dist[src] = 0.0
        heap = [(0.0, src)]
        done = np.zeros(n, dtype=bool)
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v in np.nonzero(vis[u])[0]:
                nd = d + w[u, v]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, int(v)))
        return nodes, dist

    def distances_to_targets(
        self,
        p: CarpetPoint,
        tx: np.ndarray,
        ty: np.ndarray,
        tside: Optional[np.ndarray] = None,
        tslit: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """Exact geodesic distances from p to many target points.

        The last bend of a geodesic is either p itself or a tip, so the
        distance is min over visible graph nodes u of dist(p, u) + |u - t|.
        Targets may carry side tags (tside in {-1, 0, +1} with tslit giving
        the obstacle index).
        """
        nodes, dist = self.tip_distances(p)
        n_t = len(tx)
        if tside is None:
            tside = np.zeros(n_t, dtype=np.int64)
        if tslit is None:
            tslit = np.full(n_t, -1, dtype=np.int64)
        best = np.full(n_t, np.inf)
        sx, slo, shi = self.obs.xs, self.obs.lo, self.obs.hi
        for u in range(len(nodes.xf)):
            if not np.isfinite(dist[u]):
                continue
            ux, uy = nodes.xf[u], nodes.yf[u]
            dx = tx - ux
            dy = ty - uy
            vert = dx == 0.0
            vis = np.ones(n_t, dtype=bool)
            u_side = int(nodes.side[u])
            u_slit = int(nodes.slit[u])
            if u_side != 0:
                same = (tslit == u_slit) & (tside == -u_side)
                vis &= ~(vert & same)
                vis &= vert | ((dx < 0) if u_side < 0 else (dx > 0))
            tagged = tside != 0
            if np.any(tagged):
                leave_ok = np.where(tside < 0, dx > 0, dx < 0)  # u as seen from t
                same_raw = (tslit == u_slit) & (tside == -u_side) & (u_side != 0)
                vis &= ~tagged | vert | leave_ok
                vis &= ~(tagged & vert & same_raw)
            if self.obs.count:
                lo_x = np.minimum(ux, tx)[:, None]
                hi_x = np.maximum(ux, tx)[:, None]
                between = (lo_x < sx[None, :]) & (sx[None, :] < hi_x)
                w = uy * dx[:, None] + (sx[None, :] - ux) * dy[:, None]
                sgn = np.sign(dx)[:, None]
                inside = ((w - slo[None, :] * dx[:, None]) * sgn > 0) & (
                    (shi[None, :] * dx[:, None] - w) * sgn > 0
                )
                vis &= ~np.any(between & inside, axis=1)
            cand = dist[u] + np.hypot(dx, dy)
            np.minimum(best, np.where(vis, cand, np.inf), out=best)
        return best


_LEVEL_CACHE: dict[int, LevelEngine] = {}


def level_engine(n: int) -> LevelEngine:
    if n not in _LEVEL_CACHE:
        _LEVEL_CACHE[n] = LevelEngine(slits_up_to(n))
    return _LEVEL_CACHE[n]


def distance_level(n: int, p: CarpetPoint, q: CarpetPoint) -> tuple[float, Polyline]:
    """Exact path distance in the level-n completion, with a realizing path."""
    return level_engine(n).distance(p, q)


# ---------------------------------------------------------------------------
# the double: four single-crossing unfoldings


def _reflect_y(y: Dyadic, about: int) -> Dyadic:
    return Dyadic(2 * about) - y


def _reflect_x(x: Dyadic, about: int) -> Dyadic:
    return Dyadic(2 * about) - x


class _Unfolding:
    """One seam side unfolded: base obstacles plus their mirror image."""

    def __init__(self, schedule: SlitSchedule, axis: str, about: int):
        self.axis = axis  # "y": reflect across y=about (seams B/T); "x": x=about
        self.about = about
        triples = []
        tip_points = []
        slit_list = list(schedule)
        for si, s in enumerate(slit_list):
            triples.append((s.x, s.y_lo, s.y_hi))
            for y in (s.y_lo, s.y_hi):
                tip_points.append((s.x, y, si, CarpetPoint(s.x, y, copy=FRONT)))
        off = len(slit_list)
        for si, s in enumerate(slit_list):
            if axis == "y":
                lo, hi = _reflect_y(s.y_hi, about), _reflect_y(s.y_lo, about)
                triples.append((s.x, lo, hi))
                for y, cy in ((lo, s.y_hi), (hi, s.y_lo)):
                    tip_points.append((s.x, y, off + si, CarpetPoint(s.x, cy, copy=BACK)))
            else:
                x = _reflect_x(s.x, about)
                triples.append((x, s.y_lo, s.y_hi))
                for y in (s.y_lo, s.y_hi):
                    tip_points.append((x, y, off + si, CarpetPoint(s.x, y, copy=BACK)))
        self.schedule = schedule
        self.engine = LevelEngine(schedule, _Obstacles(triples), tip_points)
        self.n_base = off

    def map_back_point(self, q: CarpetPoint) -> tuple[Dyadic, Dyadic, int, int, CarpetPoint]:
        """Place a back-copy point into the unfolded plane."""
        side = 0 if q.side is None else (-1 if q.side == LEFT else 1)
        slit_idx = -1
        if q.side is not None:
            loc = locate_in(self.schedule, q.x, q.y)
            slit_idx = self.n_base + self.schedule.slits.index(loc.slit)
        if self.axis == "y":
            return (q.x, _reflect_y(q.y, self.about), slit_idx, side, q)
        side = -side
        return (_reflect_x(q.x, self.about), q.y, slit_idx, side, q)

    def seam_point(self, x: float, y: float) -> CarpetPoint:
        return CarpetPoint(Dyadic.from_float(x), Dyadic.from_float(y))

    def distance(self, p: CarpetPoint, q: CarpetPoint) -> tuple[float, Polyline]:
        eng = self.engine
        x, y, slit, side, _ = eng.query_node(CarpetPoint(p.x, p.y, p.side))
        p_node = (x, y, slit, side, p)
        q_node = self.map_back_point(q)
        nodes, vis, w = eng._with_queries([p_node, q_node])
        src, dst = eng.n_tips, eng.n_tips + 1
        d, path = _dijkstra_lex(nodes, w, vis, src, dst)
        if not path:
            return d, Polyline.from_vertices([])
        # fold the developed polyline back, inserting the seam crossing vertex
        out: list[CarpetPoint] = []
        for k, i in enumerate(path):
            if k > 0:
                a, b = path[k - 1], path[k]
                across = self._crosses_seam(nodes, a, b)
                if across is not None:
                    out.append(across)
            out.append(nodes.points[i])
        return d, Polyline.from_vertices(out)

    def _crosses_seam(self, nodes: _Nodes, a: int, b: int) -> Optional[CarpetPoint]:
        if self.axis == "y":
            ca, cb = nodes.yf[a] - self.about, nodes.yf[b] - self.about
        else:
            ca, cb = nodes.xf[a] - self.about, nodes.xf[b] - self.about
        if ca == 0 or cb == 0 or (ca > 0) == (cb > 0):
            return None
        t = ca / (ca - cb)
        x = nodes.xf[a] + t * (nodes.xf[b] - nodes.xf[a])
        y = nodes.yf[a] + t * (nodes.yf[b] - nodes.yf[a])
        if self.axis == "y":
            return self.seam_point(x, float(self.about))
        return self.seam_point(float(self.about), y)


class DoubleEngine:
    """Distance on the double via the four single-crossing unfoldings."""

    def __init__(self, n: int):
        self.n = n
        self.schedule = slits_up_to(n)
        self.level = level_engine(n)
        self.unfoldings = [
            _Unfolding(self.schedule, "y", 0),  # across B
            _Unfolding(self.schedule, "y", 1),  # across T
            _Unfolding(self.schedule, "x", 0),  # across L
            _Unfolding(self.schedule, "x", 1),  # across R
        ]

    def distance(self, p: CarpetPoint, q: CarpetPoint) -> tuple[float, Polyline]:
        p_copy = None if p.on_seam() else p.copy
        q_copy = None if q.on_seam() else q.copy
        for pt in (p, q):
            if not pt.on_seam() and pt.copy not in (FRONT, BACK):
                raise ValueError(f"off-seam double point {pt} needs a copy tag")
        if p_copy is None or q_copy is None or p_copy == q_copy:
            # same copy (or seam): in-copy geodesic is optimal by reflection
            copy = p_copy or q_copy or FRONT
            d, path = self.level.distance(
                CarpetPoint(p.x, p.y, p.side), CarpetPoint(q.x, q.y, q.side)
            )
            verts = [
                CarpetPoint(v.x, v.y, v.side, None if v.on_seam() else copy)
                for v in path.vertices
            ]
            return d, Polyline.from_vertices(verts)
        # opposite copies: normalize so p is on the front
        if p_copy == BACK:
            p, q = q, p
        best: Optional[tuple[float, Polyline]] = None
        for unf in self.unfoldings:
            d, path = unf.distance(CarpetPoint(p.x, p.y, p.side, FRONT), q)
            if best is None or d < best[0] - 1e-15:
                best = (d, path)
        return best


_DOUBLE_CACHE: dict[int, DoubleEngine] = {}


def double_engine(n: int) -> DoubleEngine:
    if n not in _DOUBLE_CACHE:
        _DOUBLE_CACHE[n] = DoubleEngine(n)
    return _DOUBLE_CACHE[n]


def distance_double(n: int, p: CarpetPoint, q: CarpetPoint) -> tuple[float, Polyline]:
    """Path distance on the double; copies join only through the outer square."""
    return double_engine(n).distance(p, q)


# ---------------------------------------------------------------------------
# monotone level sequence


@dataclass(frozen=True)
class LimitSequence:
    values: tuple[tuple[int, float], ...]
    gap: float

    def distances(self) -> list[float]:
        return [d for _, d in self.values]


def distance_limit(p: CarpetPoint, q: CarpetPoint, n_max: int) -> LimitSequence:
    """d_n(pi_n p, pi_n q) for n = 0..n_max; lower bounds for the limit metric."""
    out = []
    for n in range(n_max + 1):
        pn = project(p, n_max, n)
        qn = project(q, n_max, n)
        d, _ = distance_level(n, pn, qn)
        out.append((n, d))
    gap = out[-1][1] - out[-2][1] if len(out) >= 2 else 0.0
    return LimitSequence(tuple(out), gap)


# ---------------------------------------------------------------------------
# grid oracle: Dijkstra on the cut grid with a visible-step stencil


def default_stencil_radius(g: int) -> int:
    """Stencil radius giving directional error ~1/(8K^2) matched to 2^-g."""
    if g <= 7:
        return 4
    if g == 8:
        return 5
    if g == 9:
        return 7
    return 8


def _stencil_directions(k: int) -> list[tuple[int, int]]:
    dirs = [(1, 0), (0, 1)]
    for dx in range(1, k + 1):
        for dy in range(-k, k + 1):
            if dy == 0 or np.gcd(dx, abs(dy)) != 1:
                continue
            dirs.append((dx, dy))
    return dirs


class GridGraph:
    """Cut-grid graph: slit columns duplicated, blocked steps removed."""

    def __init__(self, n: int, g: int, stencil: Optional[int] = None, double: bool = False):
        if g <= n:
            raise ValueError(f"grid exponent g={g} must exceed the level n={n}")
        self.n, self.g = n, g
        self.step = 0.5**g
        self.stencil = stencil if stencil is not None else default_stencil_radius(g)
        self.double = double
        schedule = slits_up_to(n)
        W = (1 << g) + 1
        self.W = W
        cols = np.array([s.x.numerator_at(g) for s in schedule], dtype=np.int64)
        los = np.array([s.y_lo.numerator_at(g) for s in schedule], dtype=np.int64)
        his = np.array([s.y_hi.numerator_at(g) for s in schedule], dtype=np.int64)
        self.slit_cols, self.slit_los, self.slit_his = cols, los, his

        # right-copy ids for strictly-inside slit nodes; base id is the left copy
        rid = np.full((W, W), -1, dtype=np.int64)
        next_id = W * W
        dup_i, dup_j = [], []
        for c, lo, hi in zip(cols, los, his):
            rows = np.arange(lo + 1, hi)
            rid[c, rows] = next_id + np.arange(len(rows))
            next_id += len(rows)
            dup_i.extend([c] * len(rows))
            dup_j.extend(rows.tolist())
        self.rid = rid
        self.n_nodes = next_id
        self.dup_i = np.array(dup_i, dtype=np.int64)
        self.dup_j = np.array(dup_j, dtype=np.int64)
        self.back_remap: Optional[np.ndarray] = None

        src_all, dst_all, w_all = self._copy_edges()
        if double:
            # glue a second copy along the outer square; seam nodes are shared
            n_single = next_id
            interior = self._interior_mask()
            remap = np.full(n_single, -1, dtype=np.int64)
            remap[~interior] = np.nonzero(~interior)[0]
            n_extra = int(interior.sum())
            remap[interior] = n_single + np.arange(n_extra)
            self.back_remap = remap
            self.n_nodes = n_single + n_extra
            src2 = remap[src_all]
            dst2 = remap[dst_all]
            src_all = np.concatenate([src_all, src2])
            dst_all = np.concatenate([dst_all, dst2])
            w_all = np.concatenate([w_all, w_all])
        self.csr = csr_matrix(
            (w_all, (src_all, dst_all)), shape=(self.n_nodes, self.n_nodes)
        )

    def _interior_mask(self) -> np.ndarray:
        W = self.W
        base = np.ones((W, W), dtype=bool)
        base[0, :] = base[-1, :] = base[:, 0] = base[:, -1] = False
        mask = np.concatenate([base.ravel(), np.ones(len(self.dup_i), dtype=bool)])
        return mask

    def _copy_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        W, K = self.W, self.stencil
        rid = self.rid
        cols, los, his = self.slit_cols, self.slit_los, self.slit_his
        on_slit_interior = rid >= 0
        srcs, dsts, ws = [], [], []
        for (dx, dy) in _stencil_directions(K):
            i0, i1 = 0, W - dx
            j0, j1 = max(0, -dy), W - max(0, dy)
            if i1 <= i0 or j1 <= j0:
                continue
            blocked = np.zeros((W, W), dtype=bool)
            if dx > 0:
                # mark segments whose crossing of a slit column lands strictly
                # inside the open interval (exact integer floor/ceil)
                for c, lo, hi in zip(cols, los, his):
                    for i in range(max(i0, c - dx + 1), min(c, i1)):
                        offs = (c - i) * dy
                        jmin = (lo * dx - offs) // dx + 1
                        jmax = -((-(hi * dx - offs)) // dx) - 1
                        jmin, jmax = max(jmin, j0), min(jmax, j1 - 1)
                        if jmin <= jmax:
                            blocked[i, jmin : jmax + 1] = True
            ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
            keep = ~blocked[i0:i1, j0:j1]
            if dx == 0:
                # unit vertical steps through slit interiors are rebuilt
                # per face below
                keep = keep & ~(on_slit_interior[ii, jj] | on_slit_interior[ii, jj + dy])
            ii, jj = ii[keep], jj[keep]
            src = ii * W + jj
            dst = (ii + dx) * W + (jj + dy)
            if dx > 0:
                # a segment leaving an in-slit node rightward belongs to its
                # right face; one arriving from the left touches the left
                # face, which is the base id
                r_src = rid[ii, jj]
                src = np.where(r_src >= 0, r_src, src)
            srcs.append(src)
            dsts.append(dst)
            ws.append(np.full(len(src), float(np.hypot(dx, dy)) * self.step))
        # vertical chains along slit columns: one chain per face, tips shared
        ex_s, ex_d = [], []
        for c, lo, hi in zip(cols, los, his):
            for j in range(lo, hi):
                a_in, b_in = rid[c, j], rid[c, j + 1]
                for use_right in (False, True):
                    if use_right and a_in < 0 and b_in < 0:
                        continue  # tip-to-tip would duplicate the left edge
                    a = a_in if (use_right and a_in >= 0) else c * W + j
                    b = b_in if (use_right and b_in >= 0) else c * W + (j + 1)
                    ex_s.append(int(a))
                    ex_d.append(int(b))
        if ex_s:
            srcs.append(np.array(ex_s, dtype=np.int64))
            dsts.append(np.array(ex_d, dtype=np.int64))
            ws.append(np.full(len(ex_s), self.step))
        return np.concatenate(srcs), np.concatenate(dsts), np.concatenate(ws)

    # -- node lookup and dual-cell weights ------------------------------

    def node_id(self, p: CarpetPoint, copy_back: bool = False) -> int:
        g = self.g
        xi = as_dyadic(p.x)
        yi = as_dyadic(p.y)
        if xi.exp > g or yi.exp > g:
            raise ValueError(f"{p} does not lie on the 2^-{g} grid")
        i, j = xi.numerator_at(g), yi.numerator_at(g)
        nid = i * self.W + j
        if p.side == RIGHT and self.rid[i, j] >= 0:
            nid = int(self.rid[i, j])
        elif p.side is not None and self.rid[i, j] < 0:
            raise ValueError(f"{p} carries a side tag but is not an in-slit grid node")
        if copy_back:
            if self.back_remap is None:
                raise ValueError("not a double grid")
            nid = int(self.back_remap[nid])
        return nid

    def node_weights(self) -> np.ndarray:
        """Dual-cell areas: interior 1, edges 1/2, corners 1/4, duplicates 1/2."""
        W = self.W
        w = np.ones((W, W))
        w[0, :] *= 0.5
        w[-1, :] *= 0.5
        w[:, 0] *= 0.5
        w[:, -1] *= 0.5
        w[self.rid >= 0] = 0.5
        out = np.concatenate([w.ravel(), np.full(len(self.dup_i), 0.5)])
        if self.double:
            out = np.concatenate([out, out[self._interior_mask()]])
        return out * self.step**2

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        W = self.W
        ii, jj = np.meshgrid(np.arange(W), np.arange(W), indexing="ij")
        xs = np.concatenate([ii.ravel(), self.dup_i]) * self.step
        ys = np.concatenate([jj.ravel(), self.dup_j]) * self.step
        if self.double:
            m = self._interior_mask()
            xs = np.concatenate([xs, xs[m]])
            ys = np.concatenate([ys, ys[m]])
        return xs, ys

    def distances_from(self, sources: Sequence[int], limit: float = np.inf) -> np.ndarray:
        return _csgraph_dijkstra(
            self.csr, directed=False, indices=list(sources), limit=limit, min_only=False
        )


_GRID_CACHE: dict[tuple, GridGraph] = {}


def grid_graph(n: int, g: int, stencil: Optional[int] = None, double: bool = False) -> GridGraph:
    key = (n, g, stencil, double)
    if key not in _GRID_CACHE:
        _GRID_CACHE[key] = GridGraph(n, g, stencil, double)
    return _GRID_CACHE[key]


@dataclass
class GridDistanceField:
    """Grid geodesic distances from one source, with node metadata."""

    graph: GridGraph
    source: CarpetPoint
    dist: np.ndarray

    def mass_within(self, r: float) -> float:
        return float(self.graph.node_weights()[self.dist < r].sum())


def ball_distances(
    n: int,
    p: CarpetPoint,
    r: float,
    grid_step: "float | Dyadic",
    stencil: Optional[int] = None,
    double: bool = False,
) -> GridDistanceField:
    """Grid Dijkstra distance field from p on the cut grid (the oracle route).

    grid_step must be 2^-g with g > n so grid lines align with every slit;
    the stencil uses all coprime steps within the given radius, each checked
    against the open slit interiors, so the directional error is O(1/K^2)
    and tips are grid nodes (no bend rounding).
    """
    gs = as_dyadic(grid_step)
    if gs.num != 1:
        raise ValueError(f"grid_step must be a power of two, got {grid_step}")
    g = gs.exp
    graph = grid_graph(n, g, stencil, double)
    src = graph.node_id(p, copy_back=(double and p.copy == BACK and not p.on_seam()))
    limit = np.inf if not np.isfinite(r) else float(r) + 4 * graph.step
    dist = graph.distances_from([src], limit=limit)[0]
    return GridDistanceField(graph, p, dist)
