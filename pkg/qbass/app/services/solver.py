"""Primal joint LP, the convex dual over potentials on supp(nu), and the phi-psi calculus."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..config import get_settings
from ..errors import DimensionError, DomainError, InfeasibleError, InputError, SizeLimitError
from ..models.schemas import DualConfig
from .convexfn import MaxAffine, PiecewiseLinear, ValuesAtPoints, conjugate, hull_pieces_1d, star
from .lp import solve_lp
from .measures import DiscreteMeasure, MartingaleKernel, require_convex_order
from .ot import Coupling

logger = logging.getLogger(__name__)


def _check_dims(*measures: DiscreteMeasure) -> None:
    dims = {p.dim for p in measures}
    if len(dims) > 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


class DualPotential:
    """Potential psi given by its values on supp(nu), with its conjugate cached."""

    def __init__(self, points, values) -> None:
        self.function = ValuesAtPoints(points, values)
        self.conjugate = MaxAffine(self.function.points, -self.function.fvalues)

    @classmethod
    def on_support(cls, nu: DiscreteMeasure, values) -> "DualPotential":
        return cls(nu.atoms, values)

    @classmethod
    def from_function(cls, f, nu: DiscreteMeasure) -> "DualPotential":
        """Restrict a convex function to the atoms of ``nu``."""

        values = np.array([f.value(y) for y in nu.atoms])
        if not np.all(np.isfinite(values)):
            raise DomainError("the potential is not finite on every atom of nu")
        return cls(nu.atoms, values)

    @property
    def points(self) -> np.ndarray:
        return self.function.points

    @property
    def values(self) -> np.ndarray:
        return self.function.fvalues

    @property
    def dim(self) -> int:
        return self.function.dim

    def gauged(self) -> "DualPotential":
        """Shifted so that psi vanishes at the lexicographically smallest atom."""

        first = int(np.lexsort(self.points.T[::-1])[0])
        return DualPotential(self.points, self.values - self.values[first])

    def check_consistency(self, rng: Optional[np.random.Generator] = None, samples: int = 10, tol: float = 1e-9) -> bool:
        rng = rng or np.random.default_rng(0)
        lo, hi = self.points.min(axis=0) - 1.0, self.points.max(axis=0) + 1.0
        for x in rng.uniform(lo, hi, size=(samples, self.dim)):
            brute = float(np.max(self.points @ x - self.values))
            if abs(brute - self.conjugate.value(x)) > tol * (1.0 + abs(brute)):
                return False
        return True


@dataclass(frozen=True)
class PrimalResult:
    value: float
    kernel: MartingaleKernel
    conditional_couplings: List[Coupling]
    dual_values: Optional[np.ndarray] = None


def _primal_system(mu: DiscreteMeasure, nu: DiscreteMeasure, q: DiscreteMeasure):
    n, m, K = mu.size, nu.size, q.size
    blocks = [sparse.kron(sparse.identity(n), sparse.kron(np.ones((1, m)), sparse.identity(K)))]
    rhs = [np.outer(mu.weights, q.weights).reshape(-1)]
    for axis in range(mu.dim):
        blocks.append(sparse.kron(sparse.identity(n), np.kron(nu.atoms[:, axis][None, :], np.ones((1, K)))))
        rhs.append(mu.weights * mu.atoms[:, axis])
    blocks.append(sparse.kron(np.ones((1, n)), sparse.kron(sparse.identity(m), np.ones((1, K)))))
    rhs.append(nu.weights)
    return sparse.vstack(blocks, format="csr"), np.concatenate(rhs)


def solve_primal_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, q: DiscreteMeasure) -> PrimalResult:
    """P^q(mu, nu) as one LP over the joint masses c_ijk at (x_i, y_j, z_k)."""

    _check_dims(mu, nu, q)
    settings = get_settings()
    n, m, K = mu.size, nu.size, q.size
    if n * m * K > settings.primal_size_limit:
        raise SizeLimitError(
            f"primal LP would have {n * m * K} variables, above the limit {settings.primal_size_limit:.0f}"
        )
    require_convex_order(mu, nu)

    A_eq, b_eq = _primal_system(mu, nu, q)
    objective = np.tile((nu.atoms @ q.atoms.T).reshape(-1), n)
    solution = solve_lp(objective, A_eq, b_eq, maximize=True)
    if not solution.feasible:
        raise InfeasibleError(f"primal LP reported {solution.message}")

    joint = np.clip(solution.x, 0.0, None).reshape(n, m, K)
    kernel = MartingaleKernel.from_joint(mu, nu, joint.sum(axis=2))
    couplings = []
    for i in range(n):
        rows = joint[i].sum(axis=1) > 1e-15
        cols = joint[i].sum(axis=0) > 1e-15
        mass = joint[i][np.ix_(rows, cols)]
        mass = mass / mass.sum()
        left = DiscreteMeasure(nu.atoms[rows], mass.sum(axis=1))
        right = DiscreteMeasure(q.atoms[cols], mass.sum(axis=0))
        couplings.append(Coupling(left, right, mass))

    dual_values = None
    if solution.eq_duals is not None:
        dual_values = solution.eq_duals[-m:].copy()
    logger.info("Primal LP solved: value=%.12g (|mu|=%s, |nu|=%s, |q|=%s)", solution.value, n, m, K)
    return PrimalResult(
        value=solution.value, kernel=kernel, conditional_couplings=couplings, dual_values=dual_values
    )


@dataclass(frozen=True)
class PhiResult:
    value: float
    y_hat: np.ndarray
    p_hat: DiscreteMeasure
    weights: np.ndarray = field(repr=False)


class PhiOracle:
    """phi^psi(x) = sup_y <x, y> - (psi* ⋆ q)(y) together with its optimizers.

    In d = 1 the star of the conjugate is built exactly once and each query is a lookup
    in its piecewise-linear conjugate; otherwise (or with ``method="lp"``) each query solves
    inf over couplings c of (p, q) with barycenter(p) = x of sum c_jk (psi_j - <y_j, z_k>).
    """

    def __init__(self, psi: DualPotential, q: DiscreteMeasure, method: str = "auto") -> None:
        if psi.dim != q.dim:
            raise DimensionError(f"dimension mismatch: {psi.dim} != {q.dim}")
        if method not in ("auto", "sweep", "lp"):
            raise InputError(f"unknown phi method {method!r}")
        if method == "sweep" and psi.dim != 1:
            raise InputError("the exact sweep is available in d = 1 only")
        self.psi = psi
        self.q = q
        self.method = "sweep" if method == "auto" and psi.dim == 1 else ("lp" if method == "auto" else method)
        if self.method == "sweep":
            slopes, _, breaks = hull_pieces_1d(psi.conjugate)
            self._slopes = slopes
            self._breaks = breaks
            self._star = star(psi.conjugate, q)
            self._phi: PiecewiseLinear = conjugate(self._star)  # type: ignore[assignment]
            # hull piece -> index of the nu atom carrying its slope
            order = np.argsort(psi.points[:, 0])
            self._hull_index = order[np.searchsorted(psi.points[order, 0], slopes)]

    def __call__(self, x) -> PhiResult:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.psi.dim:
            raise DimensionError(f"expected a point of dimension {self.psi.dim}, got {x.shape[0]}")
        if self.method == "sweep":
            return self._sweep(float(x[0]))
        return self._lp(x)

    def _sweep(self, x: float) -> PhiResult:
        phi = self._phi
        if not phi.in_domain(x):
            raise DomainError(
                f"x={x!r} lies outside the hull of supp(nu); phi may be -inf or attained at infinity"
            )
        value = float(np.interp(x, phi.knots, phi.fvalues))
        y_hat = phi.selection(x, allow_boundary=True)

        z, u = self.q.points_1d, self.q.weights
        t = y_hat + z
        tol = 1e-11 * (1.0 + np.abs(t))
        left = np.searchsorted(self._breaks, t - tol, side="left")
        right = np.searchsorted(self._breaks, t + tol, side="right")
        bary_left = float(u @ self._slopes[left])
        bary_right = float(u @ self._slopes[right])
        if bary_right - bary_left > 1e-14:
            lam = min(max((x - bary_left) / (bary_right - bary_left), 0.0), 1.0)
        else:
            lam = 0.0

        weights = np.zeros(self.psi.points.shape[0])
        np.add.at(weights, self._hull_index[left], u * (1.0 - lam))
        np.add.at(weights, self._hull_index[right], u * lam)
        p_hat = DiscreteMeasure.from_masses(self.psi.points, weights)
        return PhiResult(value=value, y_hat=np.array([y_hat]), p_hat=p_hat, weights=weights)

    def _lp(self, x: np.ndarray) -> PhiResult:
        points, values = self.psi.points, self.psi.values
        m, K, d = points.shape[0], self.q.size, self.psi.dim
        cost = (values[:, None] - points @ self.q.atoms.T).reshape(-1)
        A_eq = sparse.vstack(
            [
                sparse.kron(np.ones((1, m)), sparse.identity(K)),
                sparse.csr_matrix(np.kron(points.T, np.ones((1, K)))),
            ],
            format="csr",
        )
        b_eq = np.concatenate([self.q.weights, x])
        solution = solve_lp(cost, A_eq, b_eq)
        if not solution.feasible:
            raise DomainError(
                f"x={x.tolist()} lies outside the hull of supp(nu); phi may be -inf or attained at infinity"
            )
        weights = np.clip(solution.x, 0.0, None).reshape(m, K).sum(axis=1)
        p_hat = DiscreteMeasure.from_masses(points, weights)
        return PhiResult(value=solution.value, y_hat=solution.eq_duals[K : K + d], p_hat=p_hat, weights=weights)


def phi_psi(psi: DualPotential, q: DiscreteMeasure, x) -> PhiResult:
    return PhiOracle(psi, q)(x)


def phi_unconstrained(psi: DualPotential, q: DiscreteMeasure) -> float:
    """sup_p MCov(p, q) - ∫ psi dp, which equals ∫ psi* dq."""

    if psi.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {psi.dim} != {q.dim}")
    vals = psi.conjugate.values(q.atoms)
    if np.any(np.isinf(vals)):
        return float("inf")
    return float(q.weights @ vals)


def dual_objective(
    psi: DualPotential, mu: DiscreteMeasure, nu: DiscreteMeasure, q: DiscreteMeasure
) -> Tuple[float, np.ndarray]:
    """F(psi) = sum_j n_j psi_j - sum_i m_i phi^psi(x_i) and a subgradient in the values of psi."""

    _check_dims(mu, nu, q)
    oracle = PhiOracle(psi, q)
    phi_total = 0.0
    projected = np.zeros(nu.size)
    for weight, x in zip(mu.weights, mu.atoms):
        result = oracle(x)
        phi_total += weight * result.value
        projected += weight * result.weights
    value = float(nu.weights @ psi.values) - phi_total
    return value, nu.weights - projected


def dual_value_relaxed(
    psi: DualPotential,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    q: DiscreteMeasure,
    kernel: MartingaleKernel,
) -> float:
    """sum_i m_i (sum_j pi_i[j] psi_j - phi^psi(x_i)) for a martingale kernel pi."""

    _check_dims(mu, nu, q)
    oracle = PhiOracle(psi, q)
    if psi.points.shape[0] != nu.size:
        raise InputError("the potential must be given on the atoms of nu")
    total = 0.0
    for i, (weight, x) in enumerate(zip(mu.weights, mu.atoms)):
        total += weight * (float(kernel.rows[i] @ psi.values) - oracle(x).value)
    if total < -1e-9 and np.max(np.abs(q.barycenter())) <= 1e-12:
        logger.warning("Relaxed dual value %.3e is negative for a centred reference measure", total)
    return total


@dataclass(frozen=True)
class DualResult:
    value: float
    psi: DualPotential
    iterations: int
    gap: float
    converged: bool
    method: str
    primal_value: Optional[float] = None


def _primal_reference(mu, nu, q) -> Optional[PrimalResult]:
    try:
        return solve_primal_lp(mu, nu, q)
    except SizeLimitError as exc:
        logger.warning("No primal reference value: %s", exc)
        return None


def solve_dual(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    q: DiscreteMeasure,
    config: Optional[DualConfig] = None,
) -> DualResult:
    """Minimize F(psi) over values of psi on supp(nu)."""

    config = config or DualConfig()
    _check_dims(mu, nu, q)
    require_convex_order(mu, nu)
    primal = _primal_reference(mu, nu, q)
    reference = primal.value if primal is not None else None

    if config.method == "lp":
        if primal is None or primal.dual_values is None:
            raise DomainError("the LP dual method needs a solvable primal LP")
        psi = DualPotential.on_support(nu, primal.dual_values).gauged()
        value, _ = dual_objective(psi, mu, nu, q)
        gap = value - reference
        logger.info("Dual (lp) value=%.12g gap=%.3e", value, gap)
        return DualResult(
            value=value,
            psi=psi,
            iterations=0,
            gap=gap,
            converged=gap <= config.gap_tol,
            method="lp",
            primal_value=reference,
        )

    values = 0.5 * np.sum(nu.atoms**2, axis=1)
    values = values - values[0]
    best_value, best_values = np.inf, values.copy()
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iter + 1):
        value, grad = dual_objective(DualPotential.on_support(nu, values), mu, nu, q)
        if value < best_value:
            best_value, best_values = value, values.copy()
        if reference is not None and best_value - reference <= config.gap_tol:
            converged = True
            break
        norm2 = float(grad @ grad)
        if norm2 <= 1e-30:
            converged = reference is None
            break
        if reference is not None:
            step = max(value - reference, 0.0) / norm2
        else:
            step = config.step0 / np.sqrt(iterations * norm2)
        values = values - step * grad
        values = values - values[0]
        if iterations % 1000 == 0:
            logger.debug("Dual iteration %s: F=%.12g best=%.12g", iterations, value, best_value)

    gap = best_value - reference if reference is not None else float("inf")
    if not converged:
        logger.warning("Dual solve stopped after %s iterations with gap %.3e", iterations, gap)
    else:
        logger.info("Dual (subgradient) value=%.12g after %s iterations", best_value, iterations)
    return DualResult(
        value=best_value,
        psi=DualPotential.on_support(nu, best_values),
        iterations=iterations,
        gap=gap,
        converged=converged,
        method="subgradient",
        primal_value=reference,
    )


__all__ = [
    "DualPotential",
    "PrimalResult",
    "PhiResult",
    "PhiOracle",
    "DualResult",
    "solve_primal_lp",
    "phi_psi",
    "phi_unconstrained",
    "dual_objective",
    "dual_value_relaxed",
    "solve_dual",
]
