"""Finitely supported probability measures and convex-order predicates."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..config import get_settings
from ..errors import ConvexOrderError, DimensionError, InputError
from .lp import solve_lp

logger = logging.getLogger(__name__)

PointMap = Callable[[np.ndarray], np.ndarray]


def _as_points(atoms) -> np.ndarray:
    points = np.asarray(atoms, dtype=float)
    if points.ndim == 0:
        points = points.reshape(1, 1)
    elif points.ndim == 1:
        points = points[:, None]
    elif points.ndim != 2:
        raise InputError(f"atoms must be a list of points, got array of shape {points.shape}")
    return points


def _merge_atoms(points: np.ndarray, weights: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sort atoms lexicographically and merge those closer than ``tol`` in sup-norm."""

    order = np.lexsort(points.T[::-1])
    points = points[order]
    weights = weights[order]
    if points.shape[0] == 1:
        return points, weights

    if points.shape[1] == 1:
        starts = np.concatenate(([True], np.diff(points[:, 0]) > tol))
        groups = np.cumsum(starts) - 1
        merged = np.zeros(groups[-1] + 1)
        np.add.at(merged, groups, weights)
        return points[starts], merged

    reps: List[int] = []
    merged_weights: List[float] = []
    for idx in range(points.shape[0]):
        point = points[idx]
        target = -1
        for pos in range(len(reps) - 1, -1, -1):
            rep = points[reps[pos]]
            if point[0] - rep[0] > tol:
                break
            if np.max(np.abs(point - rep)) <= tol:
                target = pos
                break
        if target < 0:
            reps.append(idx)
            merged_weights.append(float(weights[idx]))
        else:
            merged_weights[target] += float(weights[idx])
    return points[reps], np.asarray(merged_weights)


class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    Atoms are stored sorted lexicographically, closer atoms merged, weights normalized.
    Instances are immutable and safe to share.
    """

    __slots__ = ("atoms", "weights")

    def __init__(self, atoms, weights=None, *, merge_tol: Optional[float] = None) -> None:
        settings = get_settings()
        points = _as_points(atoms)
        count = points.shape[0]
        if count == 0:
            raise InputError("a measure needs at least one atom")
        if weights is None:
            masses = np.full(count, 1.0 / count)
        else:
            masses = np.asarray(weights, dtype=float).reshape(-1)
        if masses.shape[0] != count:
            raise InputError(f"got {count} atoms but {masses.shape[0]} weights")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(masses))):
            raise InputError("atoms and weights must be finite")
        if np.any(masses <= 0.0):
            raise InputError("weights must be strictly positive")
        total = float(masses.sum())
        if abs(total - 1.0) > settings.mass_tol:
            raise InputError(f"total mass {total!r} differs from 1 by more than {settings.mass_tol}")
        tol = settings.merge_tol if merge_tol is None else merge_tol
        points, masses = _merge_atoms(points, masses / total, tol)
        masses = masses / masses.sum()
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "atoms", points)
        object.__setattr__(self, "weights", masses)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("DiscreteMeasure is immutable")

    @classmethod
    def from_masses(cls, atoms, masses, *, floor: float = 1e-15) -> "DiscreteMeasure":
        """Build a measure from possibly vanishing masses (e.g. LP output), dropping those ≤ floor."""

        points = _as_points(atoms)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        keep = masses > floor
        if not np.any(keep):
            raise InputError("all masses vanish")
        return cls(points[keep], masses[keep] / masses[keep].sum())

    @property
    def dim(self) -> int:
        return int(self.atoms.shape[1])

    @property
    def size(self) -> int:
        return int(self.atoms.shape[0])

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"DiscreteMeasure(d={self.dim}, atoms={self.size}, barycenter={self.barycenter().tolist()})"

    @property
    def points_1d(self) -> np.ndarray:
        if self.dim != 1:
            raise DimensionError(f"expected a measure on R, got dimension {self.dim}")
        return self.atoms[:, 0]

    def barycenter(self) -> np.ndarray:
        return self.weights @ self.atoms

    def second_moment(self) -> float:
        return float(self.weights @ np.sum(self.atoms**2, axis=1))

    def shift(self, offset) -> "DiscreteMeasure":
        offset = np.asarray(offset, dtype=float).reshape(-1)
        _check_dim(self.dim, offset.shape[0])
        return DiscreteMeasure(self.atoms + offset, self.weights)

    def locate(self, points, tol: Optional[float] = None) -> np.ndarray:
        """Index of the atom nearest to each point; raises if one is farther than ``tol``."""

        pts = _as_points(points)
        _check_dim(self.dim, pts.shape[1])
        tol = max(get_settings().merge_tol, 1e-12) if tol is None else tol
        dist = np.max(np.abs(pts[:, None, :] - self.atoms[None, :, :]), axis=2)
        idx = np.argmin(dist, axis=1)
        worst = float(np.max(dist[np.arange(pts.shape[0]), idx]))
        if worst > tol:
            raise InputError(f"point is not an atom of the measure (distance {worst:.3e})")
        return idx

    def allclose(self, other: "DiscreteMeasure", tol: float = 1e-12) -> bool:
        if self.dim != other.dim or self.size != other.size:
            return False
        return bool(
            np.max(np.abs(self.atoms - other.atoms)) <= tol and np.max(np.abs(self.weights - other.weights)) <= tol
        )


def _check_dim(left: int, right: int) -> None:
    if left != right:
        raise DimensionError(f"dimension mismatch: {left} != {right}")


def dirac(point) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(point, dtype=float).reshape(1, -1), [1.0])


def empirical(samples) -> DiscreteMeasure:
    """Empirical law of a sample array of shape (n,) or (n, d)."""

    return DiscreteMeasure(samples)


def barycenter(p: DiscreteMeasure) -> np.ndarray:
    return p.barycenter()


def second_moment(p: DiscreteMeasure) -> float:
    return p.second_moment()


def convolve(alpha: DiscreteMeasure, q: DiscreteMeasure) -> DiscreteMeasure:
    """Law of A + Z for independent A ~ alpha and Z ~ q."""

    _check_dim(alpha.dim, q.dim)
    points = (alpha.atoms[:, None, :] + q.atoms[None, :, :]).reshape(-1, alpha.dim)
    masses = np.outer(alpha.weights, q.weights).reshape(-1)
    return DiscreteMeasure(points, masses)


def pushforward(p: DiscreteMeasure, transport: PointMap) -> DiscreteMeasure:
    """Image measure of ``p`` under ``transport``."""

    images = []
    for atom in p.atoms:
        try:
            image = np.asarray(transport(atom), dtype=float).reshape(-1)
        except Exception as exc:
            raise InputError(f"map is undefined at atom {atom.tolist()}: {exc}") from exc
        if not np.all(np.isfinite(image)):
            raise InputError(f"map is undefined at atom {atom.tolist()}")
        images.append(image)
    return DiscreteMeasure(np.vstack(images), p.weights)


@dataclass(frozen=True)
class KernelResiduals:
    row_sum: float
    barycenter: float
    marginal: float


@dataclass(frozen=True)
class MartingaleKernel:
    """Transition kernel {pi_x} from the atoms of ``base`` to the atoms of ``target``."""

    base: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray

    @classmethod
    def from_joint(cls, base: DiscreteMeasure, target: DiscreteMeasure, mass: np.ndarray) -> "MartingaleKernel":
        mass = np.clip(np.asarray(mass, dtype=float), 0.0, None)
        rows = mass / base.weights[:, None]
        rows = rows / rows.sum(axis=1, keepdims=True)
        rows.setflags(write=False)
        return cls(base=base, target=target, rows=rows)

    def joint(self) -> np.ndarray:
        return self.base.weights[:, None] * self.rows

    def row(self, i: int) -> DiscreteMeasure:
        return DiscreteMeasure.from_masses(self.target.atoms, self.rows[i])

    def barycenters(self) -> np.ndarray:
        return self.rows @ self.target.atoms

    def terminal(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_masses(self.target.atoms, self.base.weights @ self.rows)

    def residuals(self) -> KernelResiduals:
        return KernelResiduals(
            row_sum=float(np.max(np.abs(self.rows.sum(axis=1) - 1.0))),
            barycenter=float(np.max(np.abs(self.barycenters() - self.base.atoms))),
            marginal=float(np.max(np.abs(self.base.weights @ self.rows - self.target.weights))),
        )


@dataclass(frozen=True)
class ConvexOrderResult:
    ordered: bool
    witness: Optional[MartingaleKernel] = None


@dataclass(frozen=True)
class IrreducibilityResult:
    irreducible: bool
    blocking_pair: Optional[Tuple[np.ndarray, np.ndarray]] = None
    lp_solves: int = 0


def martingale_constraints(mu: DiscreteMeasure, nu: DiscreteMeasure) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Equality system of MT(mu, nu) in the variables pi_ij (row-major)."""

    _check_dim(mu.dim, nu.dim)
    n, m = mu.size, nu.size
    eye_n = sparse.identity(n, format="csr")
    blocks = [
        sparse.kron(eye_n, np.ones((1, m))),
        sparse.kron(np.ones((1, n)), sparse.identity(m, format="csr")),
    ]
    rhs = [mu.weights, nu.weights]
    for axis in range(mu.dim):
        blocks.append(sparse.kron(eye_n, nu.atoms[:, axis][None, :]))
        rhs.append(mu.weights * mu.atoms[:, axis])
    return sparse.vstack(blocks, format="csr"), np.concatenate(rhs)


def check_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure) -> ConvexOrderResult:
    """Decide mu ≼c nu by feasibility of the martingale transport polytope."""

    A_eq, b_eq = martingale_constraints(mu, nu)
    solution = solve_lp(np.zeros(mu.size * nu.size), A_eq, b_eq)
    if not solution.feasible:
        logger.debug("Convex order LP infeasible for |mu|=%s, |nu|=%s", mu.size, nu.size)
        return ConvexOrderResult(ordered=False)
    witness = MartingaleKernel.from_joint(mu, nu, solution.x.reshape(mu.size, nu.size))
    return ConvexOrderResult(ordered=True, witness=witness)


def require_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure) -> MartingaleKernel:
    result = check_convex_order(mu, nu)
    if not result.ordered:
        raise ConvexOrderError("mu and nu are not in convex order")
    return result.witness  # type: ignore[return-value]


def _max_pair_mass(A_eq, b_eq, size: int, index: int) -> Tuple[float, np.ndarray]:
    objective = np.zeros(size)
    objective[index] = 1.0
    solution = solve_lp(objective, A_eq, b_eq, maximize=True)
    return solution.value, solution.x


def check_irreducible(mu: DiscreteMeasure, nu: DiscreteMeasure) -> IrreducibilityResult:
    """Check that every atom pair (x_i, y_j) is charged by some martingale coupling.

    Costs one LP per pair not already charged by a previously found coupling.
    """

    settings = get_settings()
    witness = require_convex_order(mu, nu)
    A_eq, b_eq = martingale_constraints(mu, nu)
    size = mu.size * nu.size
    charged = witness.joint().reshape(-1) > settings.pair_tol
    solves = 0

    if settings.workers > 1:
        pending = [idx for idx in range(size) if not charged[idx]]
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            outcomes = list(pool.map(lambda idx: _max_pair_mass(A_eq, b_eq, size, idx), pending))
        solves = len(pending)
        for idx, (value, _) in zip(pending, outcomes):
            if value > settings.pair_tol:
                charged[idx] = True
    else:
        for idx in range(size):
            if charged[idx]:
                continue
            value, x = _max_pair_mass(A_eq, b_eq, size, idx)
            solves += 1
            if value <= settings.pair_tol:
                break
            charged |= x > settings.pair_tol

    blocked = np.flatnonzero(~charged)
    logger.debug("Irreducibility scan used %s pair LPs", solves)
    if blocked.size == 0:
        return IrreducibilityResult(irreducible=True, lp_solves=solves)
    i, j = divmod(int(blocked[0]), nu.size)
    return IrreducibilityResult(
        irreducible=False,
        blocking_pair=(mu.atoms[i].copy(), nu.atoms[j].copy()),
        lp_solves=solves,
    )


__all__ = [
    "DiscreteMeasure",
    "MartingaleKernel",
    "KernelResiduals",
    "ConvexOrderResult",
    "IrreducibilityResult",
    "barycenter",
    "second_moment",
    "convolve",
    "pushforward",
    "dirac",
    "empirical",
    "martingale_constraints",
    "check_convex_order",
    "require_convex_order",
    "check_irreducible",
]
