"""Discrete extremal length on the cut grid: Laplace solves with insulating
slits, effective conductance, and curve-family moduli.

The cut grid realizes slits as removed horizontal edges with duplicated node
columns.  Edge conductances are the widths of the dual strips they carry:
interior edges 1, edges running along the outer boundary 1/2, and the
vertical edges along a slit face 1/2 (the cut halves their strip).  With
these weights the affine potentials have identically zero residual wherever
they satisfy the boundary conditions, so the unslit LR energy and the TB
energy at every level are exactly 1.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import cg as _cg

from .carpet import slits_up_to

__all__ = [
    "CutGrid",
    "GridField",
    "ConvergenceError",
    "laplace_solve",
    "conductance",
    "CurveFamilySpec",
    "modulus_direct",
    "modulus_upper_nonvertical",
    "vertical_family_bounds",
]

DEFAULT_TOL = 1e-10
ITERATION_CAP = 10**6


class ConvergenceError(RuntimeError):
    """The iterative solver did not reach the requested residual."""


class CutGrid:
    """4-neighbor grid with slit cuts, duplicated columns, dual-strip weights."""

    def __init__(self, n: int, g: int):
        if g < n + 1:
            raise ValueError(f"need g >= n+1 so slits align with the grid (n={n}, g={g})")
        self.n, self.g = n, g
        self.step = 0.5**g
        W = (1 << g) + 1
        self.W = W
        schedule = slits_up_to(n)
        cols = np.array([s.x.numerator_at(g) for s in schedule], dtype=np.int64)
        los = np.array([s.y_lo.numerator_at(g) for s in schedule], dtype=np.int64)
        his = np.array([s.y_hi.numerator_at(g) for s in schedule], dtype=np.int64)
        self.slit_cols, self.slit_los, self.slit_his = cols, los, his

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

        ea, eb, ec = [], [], []

        # horizontal edges: boundary rows carry half strips, and so do edges
        # meeting a slit tip (the open slit blocks half their dual strip);
        # the tip halving cuts the crack-tip energy error about fourfold
        tip = np.zeros((W, W), dtype=bool)
        for c0, lo, hi in zip(cols, los, his):
            tip[c0, lo] = True
            tip[c0, hi] = True
        ii, jj = np.meshgrid(np.arange(W - 1), np.arange(W), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        src = ii * W + jj
        dst = (ii + 1) * W + jj
        r_src = rid[ii, jj]
        src = np.where(r_src >= 0, r_src, src)  # depart rightward: right face
        c = np.where((jj == 0) | (jj == W - 1), 0.5, 1.0)
        c = np.where(tip[ii, jj] | tip[ii + 1, jj], c * 0.5, c)
        ea.append(src)
        eb.append(dst)  # arrive from the left: left face = base id
        ec.append(c)

        # vertical edges off slit interiors: boundary columns carry half strips
        ii, jj = np.meshgrid(np.arange(W), np.arange(W - 1), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        keep = (rid[ii, jj] < 0) & (rid[ii, jj + 1] < 0)
        ii, jj = ii[keep], jj[keep]
        ea.append(ii * W + jj)
        eb.append(ii * W + jj + 1)
        ec.append(np.where((ii == 0) | (ii == W - 1), 0.5, 1.0))

        # vertical chains along slit faces: conductance 1/2 per face,
        # which balances u=y exactly at the tips (1 below = 1/2 + 1/2 above)
        fa, fb = [], []
        for c0, lo, hi in zip(cols, los, his):
            for j in range(lo, hi):
                a_in, b_in = rid[c0, j], rid[c0, j + 1]
                for use_right in (False, True):
                    a = a_in if (use_right and a_in >= 0) else c0 * W + j
                    b = b_in if (use_right and b_in >= 0) else c0 * W + (j + 1)
                    fa.append(int(a))
                    fb.append(int(b))
        if fa:
            ea.append(np.array(fa, dtype=np.int64))
            eb.append(np.array(fb, dtype=np.int64))
            ec.append(np.full(len(fa), 0.5))

        self.edge_a = np.concatenate(ea)
        self.edge_b = np.concatenate(eb)
        self.edge_c = np.concatenate(ec).astype(float)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        W = self.W
        ii, jj = np.meshgrid(np.arange(W), np.arange(W), indexing="ij")
        xs = np.concatenate([ii.ravel(), self.dup_i]).astype(float) * self.step
        ys = np.concatenate([jj.ravel(), self.dup_j]).astype(float) * self.step
        return xs, ys

    def node_sides(self) -> np.ndarray:
        """-1 for left-face duplicates' base nodes? 0 plain, +1 right copies."""
        side = np.zeros(self.n_nodes, dtype=np.int8)
        base_in = (self.rid.ravel() >= 0).nonzero()[0]
        side[base_in] = -1
        side[self.W * self.W :] = 1
        return side

    def boundary_sets(self, direction: str) -> tuple[np.ndarray, np.ndarray]:
        """(zero side, one side) node ids for 'LR' or 'TB'."""
        W = self.W
        ii, jj = np.meshgrid(np.arange(W), np.arange(W), indexing="ij")
        flat = ii.ravel() * W + jj.ravel()
        if direction == "LR":
            lo = flat[(ii.ravel() == 0)]
            hi = flat[(ii.ravel() == W - 1)]
        elif direction == "TB":
            lo = flat[(jj.ravel() == 0)]
            hi = flat[(jj.ravel() == W - 1)]
        else:
            raise ValueError("direction must be 'LR' or 'TB'")
        return lo, hi

    def laplacian(self) -> csr_matrix:
        a, b, c = self.edge_a, self.edge_b, self.edge_c
        n = self.n_nodes
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([b, a, a, b])
        vals = np.concatenate([-c, -c, c, c])
        return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    def energy(self, u: np.ndarray) -> float:
        d = u[self.edge_a] - u[self.edge_b]
        return float(np.dot(self.edge_c * d, d))


_CUT_CACHE: dict[tuple[int, int], CutGrid] = {}


def cut_grid(n: int, g: int) -> CutGrid:
    if (n, g) not in _CUT_CACHE:
        _CUT_CACHE[(n, g)] = CutGrid(n, g)
    return _CUT_CACHE[(n, g)]


@dataclass
class GridField:
    """Solved potential on the cut grid with its Dirichlet energy."""

    grid: CutGrid
    direction: str
    values: np.ndarray
    energy: float
    residual: float
    iterations: int

    def flux_high(self) -> float:
        """Current into the u=1 side; equals the energy by the Green identity."""
        _, hi = self.grid.boundary_sets(self.direction)
        hi_set = np.zeros(self.grid.n_nodes, dtype=bool)
        hi_set[hi] = True
        a, b, c = self.grid.edge_a, self.grid.edge_b, self.grid.edge_c
        u = self.values
        once = hi_set[a] ^ hi_set[b]
        ua = np.where(hi_set[a], u[a], u[b])
        ub = np.where(hi_set[a], u[b], u[a])
        return float(np.sum(c[once] * (ua[once] - ub[once])))

    def export_lines(self) -> list[str]:
        xs, ys = self.grid.node_coords()
        sides = self.grid.node_sides()
        tag = {-1: "L", 0: "-", 1: "R"}
        return [
            f"{x:.10g} {y:.10g} {tag[int(s)]} {v:.12g}"
            for x, y, s, v in zip(xs, ys, sides, self.values)
        ]


def _preconditioner(A: csr_matrix):
    try:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(A.tocsr(), max_coarse=64)
        return ml.aspreconditioner(cycle="V")
    except Exception:
        from scipy.sparse import diags
        from scipy.sparse.linalg import LinearOperator

        d = 1.0 / A.diagonal()
        return LinearOperator(A.shape, matvec=lambda x: d * x)


def laplace_solve(n: int, g: int, boundary: str, tol: float = DEFAULT_TOL) -> GridField:
    """Solve the 5-point Laplace system with insulating slits.

    boundary is 'LR' (left 0, right 1) or 'TB' (bottom 0, top 1).  Converges
    to relative residual < tol or raises ConvergenceError; never returns an
    unconverged potential.
    """
    grid = cut_grid(n, g)
    lo, hi = grid.boundary_sets(boundary)
    N = grid.n_nodes
    fixed = np.zeros(N, dtype=bool)
    fixed[lo] = True
    fixed[hi] = True
    u = np.zeros(N)
    u[hi] = 1.0

    # affine candidate: exact solution whenever its cut-grid residual is zero
    xs, ys = grid.node_coords()
    cand = xs if boundary == "LR" else ys
    L = grid.laplacian()
    res_cand = L @ cand
    if np.all(res_cand[~fixed] == 0.0):
        return GridField(grid, boundary, cand, grid.energy(cand), 0.0, 0)

    free = ~fixed
    idx = np.nonzero(free)[0]
    A = L[idx][:, idx].tocsr()
    b = -(L[idx][:, np.nonzero(fixed)[0]] @ u[fixed])
    M = _preconditioner(A)
    x0 = cand[idx]
    iters = 0

    def _count(_):
        nonlocal iters
        iters += 1

    x, info = _cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=ITERATION_CAP, M=M, callback=_count)
    if info != 0:
        raise ConvergenceError(f"CG failed (info={info}) for n={n}, g={g}, {boundary}")
    rel = float(np.linalg.norm(A @ x - b) / np.linalg.norm(b))
    if not rel < tol * 10:  # scipy's criterion is rtol on the residual
        raise ConvergenceError(f"residual {rel} above tolerance for n={n}, g={g}")
    u[idx] = x
    return GridField(grid, boundary, u, grid.energy(u), rel, iters)


def conductance(n: int, g: int, direction: str, tol: float = DEFAULT_TOL) -> float:
    """Dirichlet energy of the solved potential = modulus of the connecting family.

    The LR value tracks the extremal distance M_n: conductance_LR ~ 1/M_n.
    """
    return laplace_solve(n, g, direction, tol).energy


# ---------------------------------------------------------------------------
# direct discrete modulus via cutting planes


@dataclass(frozen=True)
class CurveFamilySpec:
    """Curve family on the grid: connecting, vertical-only, or oscillation."""

    kind: str  # "connect-LR" | "connect-TB" | "vertical-TB" | "oscillation"
    k: int = 1  # oscillation threshold 1/k, used by kind="oscillation"

    def __post_init__(self):
        if self.kind not in ("connect-LR", "connect-TB", "vertical-TB", "oscillation"):
            raise ValueError(f"unknown curve family kind {self.kind!r}")
        if self.kind == "oscillation" and self.k < 1:
            raise ValueError("oscillation threshold needs k >= 1")


def _build_adjacency(grid: CutGrid) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(grid.n_nodes)]
    for e, (a, b) in enumerate(zip(grid.edge_a.tolist(), grid.edge_b.tolist())):
        adj[a].append((b, e))
        adj[b].append((a, e))
    return adj


def _shortest_path_edges(grid: CutGrid, adj, rho: np.ndarray, sources, targets) -> tuple[float, list[int]]:
    """Dijkstra under edge lengths rho, returning edge indices of the best path."""
    N = grid.n_nodes
    dist = np.full(N, np.inf)
    via_edge = np.full(N, -1, dtype=np.int64)
    parent = np.full(N, -1, dtype=np.int64)
    heap = []
    for s in sources:
        dist[s] = 0.0
        heap.append((0.0, int(s)))
    heapq.heapify(heap)
    target_set = set(int(t) for t in targets)
    done = np.zeros(N, dtype=bool)
    best_t = None
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u in target_set:
            best_t = u
            break
        for v, e in adj[u]:
            nd = d + rho[e]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                via_edge[v] = e
                heapq.heappush(heap, (nd, v))
    if best_t is None:
        raise RuntimeError("curve family is empty on this grid")
    edges = []
    v = best_t
    while parent[v] >= 0:
        edges.append(int(via_edge[v]))
        v = parent[v]
    return float(dist[best_t]), edges


class _FamilyOracle:
    """Shortest family member under the current edge lengths."""

    def __init__(self, grid: CutGrid, spec: CurveFamilySpec):
        self.grid = grid
        self.spec = spec
        self.adj = _build_adjacency(grid)
        W = grid.W
        ii, jj = np.meshgrid(np.arange(W), np.arange(W), indexing="ij")
        flat = ii.ravel() * W + jj.ravel()
        self.left = flat[ii.ravel() == 0]
        self.right = flat[ii.ravel() == W - 1]
        self.bottom = flat[jj.ravel() == 0]
        self.top = flat[jj.ravel() == W - 1]
        xs, _ = grid.node_coords()
        self.node_x = xs
        # per-column vertical edge lists (slit-face chains included)
        self.col_edges: list[list[int]] = [[] for _ in range(W)]
        for e, (a, b) in enumerate(zip(grid.edge_a.tolist(), grid.edge_b.tolist())):
            if xs[a] == xs[b]:
                self.col_edges[int(round(xs[a] / grid.step))].append(e)

    def shortest(self, rho: np.ndarray) -> tuple[float, list[int]]:
        g = self.grid
        kind = self.spec.kind
        if kind == "connect-LR":
            return _shortest_path_edges(g, self.adj, rho, self.left, self.right)
        if kind == "connect-TB":
            return _shortest_path_edges(g, self.adj, rho, self.bottom, self.top)
        if kind == "vertical-TB":
            return self._shortest_vertical(rho)
        return self._shortest_oscillation(rho)

    def _shortest_vertical(self, rho: np.ndarray) -> tuple[float, list[int]]:
        # vertical-only curves live in single columns; per column the best
        # side choice decomposes over slit segments, so column Dijkstra works
        best = (np.inf, [])
        for col in range(self.grid.W):
            val, edges = _column_shortest(self.grid, rho, col, self.col_edges[col])
            if val < best[0]:
                best = (val, edges)
        return best

    def _shortest_oscillation(self, rho: np.ndarray) -> tuple[float, list[int]]:
        g = self.grid
        W = g.W
        span = -((-(W - 1)) // self.spec.k)  # ceil((W-1)/k): x-gap of 1/k
        best = (np.inf, [])
        for a_col in range(W):
            far = np.abs(np.arange(W) - a_col) >= span
            if not far.any():
                continue
            sources = self._column_ids(a_col)
            targets = np.concatenate([self._column_ids(c) for c in np.nonzero(far)[0]])
            try:
                val, edges = _shortest_path_edges(g, self.adj, rho, sources, targets)
            except RuntimeError:
                continue
            if val < best[0]:
                best = (val, edges)
        if not best[1] and not np.isfinite(best[0]):
            raise RuntimeError("oscillation family empty at this resolution")
        return best

    def _column_ids(self, col: int) -> np.ndarray:
        g = self.grid
        W = g.W
        ids = [col * W + j for j in range(W)]
        dups = np.nonzero(g.dup_i == col)[0]
        ids += (W * W + dups).tolist()
        return np.array(ids, dtype=np.int64)


def _column_shortest(grid: CutGrid, rho: np.ndarray, col: int, sub_edges: list[int]) -> tuple[float, list[int]]:
    W = grid.W
    bottom = col * W + 0
    top = col * W + (W - 1)
    adj: dict[int, list[tuple[int, int]]] = {}
    for e in sub_edges:
        a, b = int(grid.edge_a[e]), int(grid.edge_b[e])
        adj.setdefault(a, []).append((b, e))
        adj.setdefault(b, []).append((a, e))
    dist = {bottom: 0.0}
    parent: dict[int, tuple[int, int]] = {}
    heap = [(0.0, bottom)]
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        if u == top:
            break
        for v, e in adj.get(u, []):
            nd = d + rho[e]
            if nd < dist.get(v, np.inf):
                dist[v] = nd
                parent[v] = (u, e)
                heapq.heappush(heap, (nd, v))
    if top not in dist:
        return np.inf, []
    edges = []
    v = top
    while v in parent:
        u, e = parent[v]
        edges.append(e)
        v = u
    return dist[top], edges


def modulus_direct(
    spec: CurveFamilySpec,
    n: int,
    g: int,
    tol: float = 1e-3,
    max_paths: int = 2000,
) -> float:
    """Discrete modulus min sum(c rho^2) over admissible rho, by cutting planes.

    Grows a generating set of family curves: repeatedly add the currently
    shortest curve under rho until its rho-length reaches 1 - tol; the inner
    quadratic program is solved by coordinate ascent on its dual (closed-form
    updates since the objective is diagonal).
    """
    grid = cut_grid(n, g)
    if grid.n_nodes > 12_000:
        raise ValueError("modulus_direct is for small instances (<= ~10^4 nodes)")
    oracle = _FamilyOracle(grid, spec)
    c = grid.edge_c
    inv2c = 1.0 / (2.0 * c)
    E = len(c)
    rho = np.zeros(E)
    paths: list[np.ndarray] = []
    # dual QP: max 1^T lam - (1/4) lam^T G lam over lam >= 0, where
    # G[i,j] = sum over shared edges of 1/(2 c_e); coordinate ascent with a
    # maintained q = G lam is exact per coordinate and cheap on a dense G
    G = np.zeros((max_paths, max_paths))
    lam = np.zeros(max_paths)
    q = np.zeros(max_paths)
    seen: set[tuple] = set()

    def _ascend(k: int, sweeps: int):
        for _sweep in range(sweeps):
            moved = 0.0
            for i in range(k):
                # q[i] is the rho-length of path i; complementarity wants 1
                new = max(0.0, lam[i] + (1.0 - q[i]) / G[i, i])
                d = new - lam[i]
                if d != 0.0:
                    lam[i] = new
                    q[:k] += d * G[:k, i]
                    moved = max(moved, abs(d) * G[i, i])
            if moved < tol * 1e-3:
                return

    def _materialize() -> np.ndarray:
        r = np.zeros(E)
        for i, other in enumerate(paths):
            if lam[i] > 0:
                r[other] += lam[i] * inv2c[other]
        return r

    for _ in range(max_paths):
        length, edges = oracle.shortest(rho)
        if length >= 1.0 - tol:
            break
        pe = np.array(sorted(set(edges)), dtype=np.int64)
        key = tuple(pe.tolist())
        k = len(paths)
        if key in seen:
            # constraint already present: the inner solve just needs more work
            _ascend(k, 2000)
        else:
            seen.add(key)
            t = np.zeros(E)
            t[pe] = inv2c[pe]
            for i, other in enumerate(paths):
                G[i, k] = G[k, i] = float(t[other].sum())
            G[k, k] = float(inv2c[pe].sum())
            paths.append(pe)
            q[: k + 1] = G[: k + 1, : k + 1] @ lam[: k + 1]
            _ascend(k + 1, 120)
        rho = _materialize()
    else:
        raise ConvergenceError("cutting-plane iteration cap reached")
    _ascend(len(paths), 2000)
    rho = _materialize()
    length, _ = oracle.shortest(rho)
    if length <= 0:
        raise ConvergenceError("degenerate family")
    scaled = rho / length  # strictly admissible
    return float(np.dot(c * scaled, scaled))


def modulus_upper_nonvertical(k: int, m: int, n: int, g: int, tol: float = DEFAULT_TOL) -> float:
    """Upper bound 4^m * conductance_LR(n) for the oscillation-1/k family.

    Mirrors the tiling-and-rescaling mass distribution: requires 2^m > 2k so
    each family curve spans one of the 2^m vertical strips.
    """
    if 2**m <= 2 * k:
        raise ValueError(f"need 2^m > 2k (got m={m}, k={k})")
    return (4.0**m) * conductance(n, g, "LR", tol)


def vertical_family_bounds(n: int, g: int) -> tuple[float, float]:
    """Bounds for the vertical connecting family's modulus on the cut grid.

    Lower: Cauchy-Schwarz along every slit-free column (the discrete Fubini
    argument).  Upper: rho = step on all vertical edges is admissible and its
    mass is the total measure, which is exactly 1 in the dual-strip weights.
    """
    grid = cut_grid(n, g)
    cols = 1 << g
    n_slit_cols = len(set(grid.slit_cols.tolist()))  # = 2^n - 1 distinct lines
    # interior slit-free columns contribute 1/2^g each, the two boundary
    # columns 1/(2*2^g) each
    lower = ((cols - 1 - n_slit_cols) + 1.0) / cols
    upper = 1.0
    return (lower, upper)
