"""Maximal covariance, optimal couplings and Brenier maps between discrete measures."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import DimensionError, InputError
from .measures import DiscreteMeasure
from .simplex import northwest_corner, solve_transportation

logger = logging.getLogger(__name__)

MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class Coupling:
    """Joint mass matrix over two supports with prescribed marginals."""

    left: DiscreteMeasure
    right: DiscreteMeasure
    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (self.left.size, self.right.size):
            raise InputError(f"coupling mass has shape {mass.shape}, expected {(self.left.size, self.right.size)}")
        if np.any(mass < -1e-15):
            raise InputError("coupling mass must be nonnegative")
        mass = np.clip(mass, 0.0, None)
        if np.max(np.abs(mass.sum(axis=1) - self.left.weights)) > MARGINAL_TOL:
            raise InputError("coupling rows do not sum to the left weights")
        if np.max(np.abs(mass.sum(axis=0) - self.right.weights)) > MARGINAL_TOL:
            raise InputError("coupling columns do not sum to the right weights")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    def covariance(self) -> float:
        return float(np.sum(self.mass * (self.left.atoms @ self.right.atoms.T)))

    def triples(self, floor: float = 0.0):
        """(i, j, mass) for every entry above ``floor``."""

        rows, cols = np.nonzero(self.mass > floor)
        return [(int(i), int(j), float(self.mass[i, j])) for i, j in zip(rows, cols)]


@dataclass(frozen=True)
class TransportResult:
    value: float
    coupling: Coupling
    potentials: Optional[Tuple[np.ndarray, np.ndarray]] = None


class BarycentricMap:
    """z_k -> barycenter of the conditional law of the target given z_k."""

    def __init__(self, source: DiscreteMeasure, images: np.ndarray) -> None:
        self.source = source
        self.images = np.asarray(images, dtype=float)

    def __call__(self, z) -> np.ndarray:
        return self.images[int(self.source.locate(np.asarray(z, dtype=float).reshape(1, -1))[0])]

    def image(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.images, self.source.weights)


def _check_dims(p: DiscreteMeasure, q: DiscreteMeasure) -> None:
    if p.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {p.dim} != {q.dim}")


def comonotone_coupling(p: DiscreteMeasure, q: DiscreteMeasure) -> Coupling:
    """Quantile coupling of two measures on R (atoms are stored sorted)."""

    _check_dims(p, q)
    if p.dim != 1:
        raise DimensionError("the comonotone coupling is defined on R only")
    mass, _ = northwest_corner(p.weights, q.weights)
    return Coupling(p, q, mass)


def transport(p: DiscreteMeasure, q: DiscreteMeasure, cost: np.ndarray) -> TransportResult:
    """Minimal-cost coupling for an explicit cost matrix, with dual potentials."""

    _check_dims(p, q)
    plan = solve_transportation(cost, p.weights, q.weights)
    return TransportResult(value=plan.cost, coupling=Coupling(p, q, plan.flow), potentials=(plan.u, plan.v))


def mcov(p: DiscreteMeasure, q: DiscreteMeasure, *, potentials: bool = False) -> TransportResult:
    """MCov(p, q) = sup over couplings of E<Y, Z>.

    In d = 1 the comonotone coupling is optimal. Otherwise the transportation problem
    with cost -<y, z> is solved by the network simplex. With ``potentials`` the returned
    pair (f, g) satisfies f_i + g_k >= <y_i, z_k> with equality where mass is charged.
    """

    _check_dims(p, q)
    if p.dim == 1 and not potentials:
        coupling = comonotone_coupling(p, q)
        return TransportResult(value=coupling.covariance(), coupling=coupling)
    result = transport(p, q, -(p.atoms @ q.atoms.T))
    f, g = result.potentials  # type: ignore[misc]
    return TransportResult(value=-result.value, coupling=result.coupling, potentials=(-f, -g))


def brenier_map(q: DiscreteMeasure, p: DiscreteMeasure) -> BarycentricMap:
    """Barycentric projection of an optimal coupling from q to p."""

    coupling = mcov(q, p).coupling
    images = (coupling.mass @ p.atoms) / q.weights[:, None]
    return BarycentricMap(q, images)


def _w2_squared_1d(p: DiscreteMeasure, r: DiscreteMeasure) -> float:
    cdf_p = np.cumsum(p.weights)
    cdf_r = np.cumsum(r.weights)
    levels = np.unique(np.concatenate(([0.0], cdf_p, cdf_r)))
    levels = levels[levels <= min(cdf_p[-1], cdf_r[-1])]
    mids = 0.5 * (levels[:-1] + levels[1:])
    qp = p.points_1d[np.clip(np.searchsorted(cdf_p, mids), 0, p.size - 1)]
    qr = r.points_1d[np.clip(np.searchsorted(cdf_r, mids), 0, r.size - 1)]
    return float(np.sum(np.diff(levels) * (qp - qr) ** 2))


def wasserstein2(p: DiscreteMeasure, r: DiscreteMeasure) -> float:
    _check_dims(p, r)
    if p.dim == 1:
        squared = _w2_squared_1d(p, r)
    else:
        cost = np.sum((p.atoms[:, None, :] - r.atoms[None, :, :]) ** 2, axis=2)
        squared = transport(p, r, cost).value
    return float(np.sqrt(max(squared, 0.0)))


__all__ = [
    "Coupling",
    "TransportResult",
    "BarycentricMap",
    "comonotone_coupling",
    "transport",
    "mcov",
    "brenier_map",
    "wasserstein2",
]
