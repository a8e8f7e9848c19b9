"""Transportation problem solved with the network (MODI / u-v) simplex method."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import ConvergenceError, InputError

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

PIVOT_TOL = 1e-12
# consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERACY_PATIENCE = 50


@dataclass(frozen=True)
class TransportPlan:
    flow: np.ndarray
    cost: float
    u: np.ndarray
    v: np.ndarray
    pivots: int


def northwest_corner(supply: np.ndarray, demand: np.ndarray) -> Tuple[np.ndarray, List[Cell]]:
    """Initial basic feasible solution: a staircase of exactly n + m - 1 cells.

    On sorted 1D supports this is the comonotone (quantile) coupling.
    """

    n, m = supply.shape[0], demand.shape[0]
    rest_supply = supply.astype(float).copy()
    rest_demand = demand.astype(float).copy()
    flow = np.zeros((n, m))
    basis: List[Cell] = []
    i = j = 0
    while True:
        amount = min(rest_supply[i], rest_demand[j])
        flow[i, j] = amount
        basis.append((i, j))
        rest_supply[i] -= amount
        rest_demand[j] -= amount
        if i == n - 1 and j == m - 1:
            break
        if j == m - 1 or (i < n - 1 and rest_supply[i] <= rest_demand[j]):
            i += 1
        else:
            j += 1
    return flow, basis


def _adjacency(basis: List[Cell], n: int, m: int) -> List[List[int]]:
    # nodes 0..n-1 are rows, n..n+m-1 are columns
    adjacency: List[List[int]] = [[] for _ in range(n + m)]
    for i, j in basis:
        adjacency[i].append(n + j)
        adjacency[n + j].append(i)
    return adjacency


def tree_potentials(cost: np.ndarray, basis: List[Cell]) -> Tuple[np.ndarray, np.ndarray]:
    """Dual potentials with u_i + v_j = c_ij on the basis tree and u_0 = 0."""

    n, m = cost.shape
    adjacency = _adjacency(basis, n, m)
    potential = np.full(n + m, np.nan)
    potential[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for other in adjacency[node]:
            if not np.isnan(potential[other]):
                continue
            if node < n:
                potential[other] = cost[node, other - n] - potential[node]
            else:
                potential[other] = cost[other, node - n] - potential[node]
            queue.append(other)
    if np.any(np.isnan(potential)):
        raise ConvergenceError("basis is not a spanning tree")
    return potential[:n], potential[n:]


def _cycle(basis: List[Cell], n: int, m: int, entering: Cell) -> List[Cell]:
    """Cells of the unique cycle closed by ``entering``, starting with it (signs alternate +, -)."""

    adjacency = _adjacency(basis, n, m)
    row, col = entering
    parent = {row: -1}
    queue = deque([row])
    while queue:
        node = queue.popleft()
        if node == n + col:
            break
        for other in adjacency[node]:
            if other not in parent:
                parent[other] = node
                queue.append(other)

    cycle = [entering]
    node = n + col
    while parent[node] != -1:
        prev = parent[node]
        cycle.append((prev, node - n) if prev < n else (node, prev - n))
        node = prev
    return cycle


def solve_transportation(
    cost,
    supply,
    demand,
    *,
    max_pivots: Optional[int] = None,
    tol: float = PIVOT_TOL,
) -> TransportPlan:
    """Minimize sum c_ij f_ij over flows with row sums ``supply`` and column sums ``demand``."""

    cost = np.asarray(cost, dtype=float)
    supply = np.asarray(supply, dtype=float).reshape(-1)
    demand = np.asarray(demand, dtype=float).reshape(-1)
    n, m = supply.shape[0], demand.shape[0]
    if cost.shape != (n, m):
        raise InputError(f"cost matrix has shape {cost.shape}, expected {(n, m)}")
    if np.any(supply < 0) or np.any(demand < 0):
        raise InputError("supply and demand must be nonnegative")
    if abs(supply.sum() - demand.sum()) > 1e-9 * max(1.0, supply.sum()):
        raise InputError("supply and demand totals differ")
    demand = demand * (supply.sum() / demand.sum())

    flow, basis = northwest_corner(supply, demand)
    scale = 1.0 + float(np.max(np.abs(cost)))
    cap = max_pivots if max_pivots is not None else max(1000, 20 * n * m)
    degenerate_run = 0
    pivots = 0

    while True:
        u, v = tree_potentials(cost, basis)
        reduced = cost - u[:, None] - v[None, :]
        if degenerate_run > DEGENERACY_PATIENCE:
            candidates = np.flatnonzero(reduced.reshape(-1) < -tol * scale)
            if candidates.size == 0:
                break
            entering = divmod(int(candidates[0]), m)
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol * scale:
                break
            entering = divmod(flat, m)

        if pivots >= cap:
            raise ConvergenceError("network simplex pivot cap reached", float(-reduced.min()))
        cycle = _cycle(basis, n, m, entering)
        minus = cycle[1::2]
        theta = min(flow[cell] for cell in minus)
        leaving = min((cell for cell in minus if flow[cell] <= theta), key=lambda cell: cell[0] * m + cell[1])
        for pos, cell in enumerate(cycle):
            flow[cell] += theta if pos % 2 == 0 else -theta
        flow[leaving] = 0.0
        basis.remove(leaving)
        basis.append(entering)
        pivots += 1
        degenerate_run = degenerate_run + 1 if theta <= tol else 0

    flow = np.clip(flow, 0.0, None)
    logger.debug("Network simplex finished after %s pivots (%sx%s)", pivots, n, m)
    return TransportPlan(flow=flow, cost=float(np.sum(flow * cost)), u=u, v=v, pivots=pivots)


__all__ = ["TransportPlan", "northwest_corner", "tree_potentials", "solve_transportation"]
