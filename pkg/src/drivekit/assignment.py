"""Minimum-cost one-to-one assignment (Kuhn-Munkres).

The solver runs the O(n^3) shortest-augmenting-path form of the Hungarian
method on the zero-padded square matrix. Among all optimal matchings it
returns the lexicographically smallest pair list: every optimal matching
uses only edges that are tight under the final dual potentials, so the
tie-break is a lexicographic perfect-matching search on that subgraph.
"""

from __future__ import annotations

import math
import sys
from typing import List, Sequence, Tuple

import numpy as np

Pair = Tuple[int, int]


def _as_matrix(costs) -> List[List[float]]:
    arr = np.asarray(costs, dtype=float)
    if arr.size == 0:
        rows = arr.shape[0] if arr.ndim >= 1 else 0
        cols = arr.shape[1] if arr.ndim == 2 else 0
        return [[] for _ in range(rows)] if cols == 0 else [[0.0] * cols for _ in range(rows)]
    if arr.ndim != 2:
        raise ValueError(f"cost matrix must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise ValueError(f"cost matrix has a non-finite entry at {bad}")
    return arr.tolist()


def _solve_square(c: List[List[float]]) -> Tuple[List[int], List[float], List[float]]:
    """Return (row -> col assignment, row potentials, col potentials)."""
    n = len(c)
    inf = math.inf
    # 1-indexed with a virtual column 0
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    owner = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = c[i0 - 1]
            delta = inf
            j1 = 0
            ui0 = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        assign[owner[j] - 1] = j - 1
    return assign, u[1:], v[1:]


def _lexmin_on_tight(c: List[List[float]], assign: List[int], u: Sequence[float], v: Sequence[float]) -> List[int]:
    n = len(c)
    scale = max(1.0, max((abs(x) for row in c for x in row), default=0.0))
    # round-off bound on reduced costs; genuine cost gaps above it are never treated as ties
    tol = 16 * n * sys.float_info.epsilon * scale
    tight = [[j for j in range(n) if c[i][j] - u[i] - v[j] <= tol] for i in range(n)]
    for i in range(n):
        if assign[i] not in tight[i]:
            tight[i].append(assign[i])
            tight[i].sort()
    owner = [0] * n
    for i, j in enumerate(assign):
        owner[j] = i

    for i in range(n):
        target = assign[i]
        for j in tight[i]:
            if j >= target:
                break
            path = _reroute(tight, assign, owner, i, j, target)
            if path is not None:
                # path: rows r_k moving to columns c_k
                for r, col in path:
                    assign[r] = col
                    owner[col] = r
                assign[i] = j
                owner[j] = i
                break
    return assign


def _reroute(tight, assign, owner, fixed_upto: int, want: int, freed: int):
    """Find moves letting row ``fixed_upto`` take column ``want``.

    The current owner of ``want`` must move along an alternating path of
    tight edges, using only rows after ``fixed_upto``, until some row lands
    on ``freed``. Returns the list of (row, new column) moves or None.
    """
    start = owner[want]
    if start <= fixed_upto:
        return None
    # parent[r] = (row that takes r's current column, that column)
    parent = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for r in frontier:
            for col in tight[r]:
                if col == want or col == assign[r]:
                    continue
                if col == freed:
                    moves = [(r, col)]
                    while parent[r] is not None:
                        r, taken = parent[r]
                        moves.append((r, taken))
                    return moves
                r2 = owner[col]
                if r2 > fixed_upto and r2 not in parent:
                    parent[r2] = (r, col)
                    nxt.append(r2)
        frontier = nxt
    return None


def hungarian(costs) -> Tuple[List[Pair], float]:
    """Solve a (possibly rectangular) min-cost assignment.

    Args:
        costs: rows x cols array-like of finite costs (rows = predictions,
            cols = ground truths).

    Returns:
        ``(pairs, total_cost)`` where ``pairs`` holds min(rows, cols)
        ``(row, col)`` tuples sorted by row, and ``total_cost`` is the sum of
        the selected entries.

    Raises:
        ValueError: if any entry is non-finite.
    """
    c = _as_matrix(costs)
    rows = len(c)
    cols = len(c[0]) if rows else 0
    if rows == 0 or cols == 0:
        return [], 0.0
    n = max(rows, cols)
    square = [[c[i][j] if (i < rows and j < cols) else 0.0 for j in range(n)] for i in range(n)]
    assign, u, v = _solve_square(square)
    assign = _lexmin_on_tight(square, assign, u, v)
    pairs = [(i, assign[i]) for i in range(rows) if assign[i] < cols]
    total = 0.0
    for i, j in pairs:
        total += c[i][j]
    return pairs, total
