"""Convex functions: representations, conjugation, the star operation and hulls.

Four exact representations are provided. ``MaxAffine`` and ``ValuesAtPoints`` are
conjugate to each other in any dimension; in d = 1 the conjugate of a ``MaxAffine`` is
the bounded-domain ``PiecewiseLinear`` and the star operation against a discrete measure
is computed exactly by a breakpoint sweep. ``SmoothQuadLSE`` is the smooth strictly
convex family used for Bass generating potentials. Everything else goes through the
``StarOracle`` and ``ConjugateOracle`` evaluation oracles.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import ConvexHull
from scipy.special import logsumexp, softmax

from ..config import get_settings
from ..errors import ConvergenceError, DimensionError, DomainError, InputError
from .lp import solve_lp
from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)

_TIE_RTOL = 1e-12


def _as_point(y, dim: int) -> np.ndarray:
    point = np.asarray(y, dtype=float).reshape(-1)
    if point.shape[0] != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {point.shape[0]}")
    return point


def _as_matrix(rows, name: str) -> np.ndarray:
    matrix = np.asarray(rows, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise InputError(f"{name} must be a non-empty list of points")
    if not np.all(np.isfinite(matrix)):
        raise InputError(f"{name} must be finite")
    return matrix


def _as_vector(values, size: int, name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float).reshape(-1)
    if vector.shape[0] != size:
        raise InputError(f"{name} has {vector.shape[0]} entries, expected {size}")
    if not np.all(np.isfinite(vector)):
        raise InputError(f"{name} must be finite")
    return vector


class ConvexFunction(ABC):
    """A proper convex function R^d -> (-inf, +inf]."""

    kind = "abstract"

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def value(self, y: np.ndarray) -> float:
        ...

    @abstractmethod
    def gradient(self, y: np.ndarray) -> np.ndarray:
        """A subgradient at an interior point of the domain (see ``grad_select``)."""

    def values(self, ys: np.ndarray) -> np.ndarray:
        return np.array([self.value(y) for y in np.atleast_2d(ys)])

    def gradients(self, ys: np.ndarray) -> np.ndarray:
        return np.vstack([self.gradient(y) for y in np.atleast_2d(ys)])

    def strict_convexity_margin(self) -> float:
        return 0.0

    def __call__(self, y) -> float:
        return self.value(_as_point(y, self.dim))


class MaxAffine(ConvexFunction):
    """y -> max_k <s_k, y> + b_k."""

    kind = "max_affine"

    def __init__(self, slopes, intercepts) -> None:
        self.slopes = _as_matrix(slopes, "slopes")
        self.intercepts = _as_vector(intercepts, self.slopes.shape[0], "intercepts")

    @property
    def dim(self) -> int:
        return int(self.slopes.shape[1])

    def __repr__(self) -> str:
        return f"MaxAffine(d={self.dim}, pieces={self.slopes.shape[0]})"

    def value(self, y: np.ndarray) -> float:
        return float(np.max(self.slopes @ y + self.intercepts))

    def values(self, ys: np.ndarray) -> np.ndarray:
        return np.max(np.atleast_2d(ys) @ self.slopes.T + self.intercepts, axis=1)

    def active(self, y: np.ndarray) -> np.ndarray:
        scores = self.slopes @ y + self.intercepts
        top = float(np.max(scores))
        return scores >= top - _TIE_RTOL * (1.0 + abs(top))

    def gradient(self, y: np.ndarray) -> np.ndarray:
        # ties: average of the active slopes
        return self.slopes[self.active(y)].mean(axis=0)


class ValuesAtPoints(ConvexFunction):
    """psi_j at y_j and +inf elsewhere; the natural home of potentials living on supp(nu)."""

    kind = "values"

    def __init__(self, points, values) -> None:
        self.points = _as_matrix(points, "points")
        self.fvalues = _as_vector(values, self.points.shape[0], "values")
        if np.unique(self.points, axis=0).shape[0] != self.points.shape[0]:
            raise InputError("points must be pairwise distinct")

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def __repr__(self) -> str:
        return f"ValuesAtPoints(d={self.dim}, points={self.points.shape[0]})"

    def value(self, y: np.ndarray) -> float:
        dist = np.max(np.abs(self.points - y), axis=1)
        idx = int(np.argmin(dist))
        if dist[idx] <= 1e-12 * (1.0 + float(np.max(np.abs(y)))):
            return float(self.fvalues[idx])
        return float("inf")

    def gradient(self, y: np.ndarray) -> np.ndarray:
        raise DomainError("the domain of a ValuesAtPoints function has empty interior")


class PiecewiseLinear(ConvexFunction):
    """Convex piecewise-linear function on [knots[0], knots[-1]] (d = 1), +inf outside."""

    kind = "piecewise_linear"

    def __init__(self, knots, values) -> None:
        self.knots = np.asarray(knots, dtype=float).reshape(-1)
        self.fvalues = _as_vector(values, self.knots.shape[0], "values")
        if self.knots.size == 0:
            raise InputError("a piecewise-linear function needs at least one knot")
        if np.any(np.diff(self.knots) <= 0):
            raise InputError("knots must be strictly increasing")
        slopes = self.slopes
        if slopes.size > 1 and np.any(np.diff(slopes) < -1e-9 * (1.0 + np.max(np.abs(slopes)))):
            raise InputError("piecewise-linear values are not convex")

    @property
    def dim(self) -> int:
        return 1

    def __repr__(self) -> str:
        return f"PiecewiseLinear(domain=[{self.knots[0]}, {self.knots[-1]}], knots={self.knots.size})"

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.fvalues) / np.diff(self.knots)

    def _tol(self, x: float) -> float:
        return 1e-12 * (1.0 + abs(x))

    def in_domain(self, x: float) -> bool:
        tol = self._tol(x)
        return self.knots[0] - tol <= x <= self.knots[-1] + tol

    def value(self, y: np.ndarray) -> float:
        x = float(np.asarray(y, dtype=float).reshape(-1)[0])
        if not self.in_domain(x):
            return float("inf")
        return float(np.interp(x, self.knots, self.fvalues))

    def values(self, ys: np.ndarray) -> np.ndarray:
        xs = np.asarray(ys, dtype=float).reshape(-1)
        tol = 1e-12 * (1.0 + np.abs(xs))
        inside = (xs >= self.knots[0] - tol) & (xs <= self.knots[-1] + tol)
        out = np.full(xs.shape, np.inf)
        out[inside] = np.interp(xs[inside], self.knots, self.fvalues)
        return out

    def selection(self, x: float, *, allow_boundary: bool = False) -> float:
        """Tie-broken subgradient at ``x``; at the domain boundary the one-sided slope."""

        if not self.in_domain(x):
            raise DomainError(f"{x!r} lies outside the domain [{self.knots[0]}, {self.knots[-1]}]")
        slopes = self.slopes
        count = self.knots.size
        tol = self._tol(x)
        near = np.flatnonzero(np.abs(self.knots - x) <= tol)
        if near.size:
            pos = int(near[0])
            boundary = pos == 0 or pos == count - 1
            if boundary and not allow_boundary:
                raise DomainError(f"{x!r} lies on the boundary of the domain")
            if count == 1:
                return 0.0
            if pos == 0:
                return float(slopes[0])
            if pos == count - 1:
                return float(slopes[-1])
            return 0.5 * float(slopes[pos - 1] + slopes[pos])
        return float(slopes[int(np.searchsorted(self.knots, x)) - 1])

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return np.array([self.selection(float(np.asarray(y).reshape(-1)[0]))])


class SmoothQuadLSE(ConvexFunction):
    """y -> eps |y|^2 / 2 + beta * log sum_k exp((<s_k, y> + b_k) / beta)."""

    kind = "smooth_quad_lse"

    def __init__(self, epsilon: float, slopes, intercepts, beta: float) -> None:
        if not (np.isfinite(epsilon) and epsilon >= 0.0):
            raise InputError(f"epsilon must be >= 0, got {epsilon!r}")
        if not (np.isfinite(beta) and beta > 0.0):
            raise InputError(f"beta must be > 0, got {beta!r}")
        self.epsilon = float(epsilon)
        self.beta = float(beta)
        self.slopes = _as_matrix(slopes, "slopes")
        self.intercepts = _as_vector(intercepts, self.slopes.shape[0], "intercepts")

    @classmethod
    def quadratic(cls, dim: int = 1) -> "SmoothQuadLSE":
        """The potential |y|^2 / 2."""

        return cls(1.0, np.zeros((1, dim)), [0.0], 1.0)

    @property
    def dim(self) -> int:
        return int(self.slopes.shape[1])

    def __repr__(self) -> str:
        return f"SmoothQuadLSE(d={self.dim}, pieces={self.slopes.shape[0]}, eps={self.epsilon}, beta={self.beta})"

    def _scores(self, ys: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(ys) @ self.slopes.T + self.intercepts) / self.beta

    def value(self, y: np.ndarray) -> float:
        return float(self.values(y)[0])

    def values(self, ys: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(ys)
        quad = 0.5 * self.epsilon * np.sum(ys**2, axis=1)
        return quad + self.beta * logsumexp(self._scores(ys), axis=1)

    def analytic_value(self, y: np.ndarray) -> complex:
        """Holomorphic extension of ``value`` (used for complex-step differentiation)."""

        y = np.asarray(y)
        scores = (self.slopes @ y + self.intercepts) / self.beta
        shift = float(np.max(scores.real))
        return 0.5 * self.epsilon * np.sum(y * y) + self.beta * (shift + np.log(np.sum(np.exp(scores - shift))))

    def gradients(self, ys: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(ys)
        return self.epsilon * ys + softmax(self._scores(ys), axis=1) @ self.slopes

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return self.gradients(y)[0]

    def hessian(self, y: np.ndarray) -> np.ndarray:
        w = softmax(self._scores(y)[0])
        mean = w @ self.slopes
        cov = (self.slopes * w[:, None]).T @ self.slopes - np.outer(mean, mean)
        return self.epsilon * np.eye(self.dim) + cov / self.beta

    def strict_convexity_margin(self) -> float:
        return self.epsilon

    def gradient_bounds_1d(self) -> Tuple[float, float]:
        if self.epsilon > 0.0:
            return -np.inf, np.inf
        return float(self.slopes[:, 0].min()), float(self.slopes[:, 0].max())

    def slope_points(self) -> Optional[np.ndarray]:
        """Closure of the gradient range when it is bounded (epsilon = 0)."""

        return None if self.epsilon > 0.0 else self.slopes


class StarOracle(ConvexFunction):
    """(f ⋆ q)(y) = sum_k u_k f(y + z_k) evaluated per query."""

    kind = "star"

    def __init__(self, base: ConvexFunction, q: DiscreteMeasure) -> None:
        if base.dim != q.dim:
            raise DimensionError(f"dimension mismatch: {base.dim} != {q.dim}")
        self.base = base
        self.q = q

    @property
    def dim(self) -> int:
        return self.base.dim

    def __repr__(self) -> str:
        return f"StarOracle({self.base!r}, |q|={self.q.size})"

    def value(self, y: np.ndarray) -> float:
        vals = self.base.values(y[None, :] + self.q.atoms)
        if np.any(np.isinf(vals)):
            return float("inf")
        return float(self.q.weights @ vals)

    def values(self, ys: np.ndarray) -> np.ndarray:
        return np.array([self.value(y) for y in np.atleast_2d(ys)])

    def gradient(self, y: np.ndarray) -> np.ndarray:
        return self.q.weights @ self.base.gradients(y[None, :] + self.q.atoms)

    def gradients(self, ys: np.ndarray) -> np.ndarray:
        ys = np.atleast_2d(ys)
        shifted = (ys[:, None, :] + self.q.atoms[None, :, :]).reshape(-1, self.dim)
        grads = self.base.gradients(shifted).reshape(ys.shape[0], self.q.size, self.dim)
        return np.einsum("k,nkd->nd", self.q.weights, grads)

    def hessian(self, y: np.ndarray) -> np.ndarray:
        if not hasattr(self.base, "hessian"):
            raise InputError(f"{self.base.kind} has no Hessian")
        return sum(u * self.base.hessian(y + z) for u, z in zip(self.q.weights, self.q.atoms))

    def strict_convexity_margin(self) -> float:
        return self.base.strict_convexity_margin()

    def gradient_bounds_1d(self) -> Tuple[float, float]:
        return self.base.gradient_bounds_1d()  # type: ignore[attr-defined]

    def slope_points(self) -> Optional[np.ndarray]:
        return self.base.slope_points()  # type: ignore[attr-defined]


def _is_smooth(f: ConvexFunction) -> bool:
    if isinstance(f, SmoothQuadLSE):
        return True
    return isinstance(f, StarOracle) and _is_smooth(f.base)


def in_open_hull(x: np.ndarray, points: np.ndarray) -> bool:
    """Whether ``x`` lies in the interior of the convex hull of ``points``."""

    if points.shape[1] == 1:
        return bool(points[:, 0].min() < x[0] < points[:, 0].max())
    try:
        hull = ConvexHull(points)
    except Exception:  # flat point sets have an empty interior
        return False
    return bool(np.all(hull.equations[:, :-1] @ x + hull.equations[:, -1] < -1e-12))


def solve_gradient_equation(
    f: ConvexFunction,
    x: np.ndarray,
    *,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> np.ndarray:
    """Solve grad f(y) = x for smooth strictly convex ``f``.

    d = 1: bracketed Newton with bisection fallback. d >= 2: damped Newton with backtracking.
    """

    settings = get_settings()
    tol = settings.newton_tol if tol is None else tol
    max_iter = settings.newton_max_iter if max_iter is None else max_iter
    if f.dim == 1:
        return np.array([_solve_monotone_1d(f, float(x[0]), tol, max_iter)])

    y = np.zeros(f.dim)
    for _ in range(max_iter):
        residual = x - f.gradient(y)
        norm = float(np.linalg.norm(residual))
        if norm <= tol:
            return y
        hess = f.hessian(y)  # type: ignore[attr-defined]
        try:
            step = np.linalg.solve(hess + 1e-14 * np.eye(f.dim), residual)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, residual, rcond=None)[0]
        base = float(x @ y - f.value(y))
        t = 1.0
        while True:
            candidate = y + t * step
            gain = float(x @ candidate - f.value(candidate))
            if gain >= base + 1e-4 * t * float(residual @ step):
                break
            if np.linalg.norm(x - f.gradient(candidate)) < norm:
                break
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("Newton line search stalled", norm)
        y = candidate
    raise ConvergenceError("Newton iteration cap reached", float(np.linalg.norm(x - f.gradient(y))))


def _solve_monotone_1d(f: ConvexFunction, target: float, tol: float, max_iter: int) -> float:
    def residual(t: float) -> float:
        return float(f.gradient(np.array([t]))[0]) - target

    y = 0.0
    r = residual(y)
    if abs(r) <= tol:
        return y
    step = 1.0
    if r < 0.0:
        lo, hi = y, y + step
        while residual(hi) < 0.0:
            lo, step = hi, 2.0 * step
            hi = lo + step
            if step > 1e300:
                raise ConvergenceError("could not bracket the gradient equation", abs(r))
    else:
        lo, hi = y - step, y
        while residual(lo) > 0.0:
            hi, step = lo, 2.0 * step
            lo = hi - step
            if step > 1e300:
                raise ConvergenceError("could not bracket the gradient equation", abs(r))

    y = 0.5 * (lo + hi)
    for _ in range(max_iter):
        r = residual(y)
        if abs(r) <= tol:
            return y
        if r < 0.0:
            lo = y
        else:
            hi = y
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(y)):
            logger.debug("Bracket collapsed at y=%s with residual %.3e", y, r)
            return y
        curvature = float(f.hessian(np.array([y]))[0, 0])  # type: ignore[attr-defined]
        newton = y - r / curvature if curvature > 0.0 else np.nan
        y = newton if lo < newton < hi else 0.5 * (lo + hi)
    raise ConvergenceError("monotone solve iteration cap reached", abs(residual(y)))


class ConjugateOracle(ConvexFunction):
    """x -> sup_y <x, y> - f(y), solved per query.

    Max-affine functions (and their star against a discrete measure) are conjugated
    through a linear program; smooth functions through ``solve_gradient_equation``.
    """

    kind = "conjugate"

    def __init__(self, base: ConvexFunction) -> None:
        supported = _is_smooth(base) or isinstance(base, MaxAffine)
        supported = supported or (isinstance(base, StarOracle) and isinstance(base.base, MaxAffine))
        if not supported:
            raise InputError(f"no numerical conjugate available for {base.kind}")
        self.base = base

    @property
    def dim(self) -> int:
        return self.base.dim

    def __repr__(self) -> str:
        return f"ConjugateOracle({self.base!r})"

    def argmax(self, x: np.ndarray) -> Optional[np.ndarray]:
        """A maximizer of <x, y> - f(y), or None when the supremum is +inf."""

        x = _as_point(x, self.dim)
        if isinstance(self.base, MaxAffine):
            return self._max_affine_lp(x)[1]
        if isinstance(self.base, StarOracle) and isinstance(self.base.base, MaxAffine):
            return self._star_lp(x)[1]
        return self._smooth_argmax(x)

    def _smooth_argmax(self, x: np.ndarray) -> Optional[np.ndarray]:
        if self.base.strict_convexity_margin() <= 0.0:
            if self.dim == 1:
                lo, hi = self.base.gradient_bounds_1d()  # type: ignore[attr-defined]
                if not lo < x[0] < hi:
                    return None
            else:
                points = self.base.slope_points()  # type: ignore[attr-defined]
                if points is not None and not in_open_hull(x, points):
                    return None
        return solve_gradient_equation(self.base, x)

    def _max_affine_lp(self, x: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
        f: MaxAffine = self.base  # type: ignore[assignment]
        pieces = f.slopes.shape[0]
        A_eq = np.vstack([f.slopes.T, np.ones((1, pieces))])
        b_eq = np.concatenate([x, [1.0]])
        solution = solve_lp(-f.intercepts, A_eq, b_eq)
        if not solution.feasible:
            return float("inf"), None
        return solution.value, solution.eq_duals[: self.dim]

    def _star_lp(self, x: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
        # epigraph form: max <x,y> - sum_k u_k t_k  s.t.  t_k >= <s_j, y + z_k> + b_j
        star: StarOracle = self.base  # type: ignore[assignment]
        f: MaxAffine = star.base  # type: ignore[assignment]
        d, pieces, atoms = self.dim, f.slopes.shape[0], star.q.size
        rows_y = np.tile(f.slopes, (atoms, 1))
        rows_t = sparse.kron(sparse.identity(atoms), -np.ones((pieces, 1)))
        A_ub = sparse.hstack([sparse.csr_matrix(rows_y), rows_t], format="csr")
        b_ub = -(star.q.atoms @ f.slopes.T + f.intercepts).reshape(-1)
        c = np.concatenate([-x, star.q.weights])
        solution = solve_lp(c, None, None, A_ub=A_ub, b_ub=b_ub, bounds=(None, None))
        if not solution.feasible:
            return float("inf"), None
        return -solution.value, solution.x[:d]

    def value(self, x: np.ndarray) -> float:
        x = _as_point(x, self.dim)
        if isinstance(self.base, MaxAffine):
            return self._max_affine_lp(x)[0]
        if isinstance(self.base, StarOracle) and isinstance(self.base.base, MaxAffine):
            return self._star_lp(x)[0]
        y = self._smooth_argmax(x)
        if y is None:
            return float("inf")
        return float(x @ y - self.base.value(y))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        y = self.argmax(x)
        if y is None:
            raise DomainError(f"{np.asarray(x).tolist()} lies outside the domain of the conjugate")
        return y


def lower_hull_1d(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex envelope of planar points (monotone chain)."""

    xs = np.asarray(xs, dtype=float).reshape(-1)
    ys = np.asarray(ys, dtype=float).reshape(-1)
    order = np.lexsort((ys, xs))
    xs, ys = xs[order], ys[order]
    first = np.concatenate(([True], np.diff(xs) > 0))
    xs, ys = xs[first], ys[first]

    hull_x: list = []
    hull_y: list = []
    for x, y in zip(xs, ys):
        while len(hull_x) >= 2:
            x1, y1, x2, y2 = hull_x[-2], hull_y[-2], hull_x[-1], hull_y[-1]
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hull_x.pop()
                hull_y.pop()
            else:
                break
        hull_x.append(x)
        hull_y.append(y)
    return np.asarray(hull_x), np.asarray(hull_y)


def hull_pieces_1d(f: MaxAffine) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Active pieces of a 1D max-affine function sorted by slope, with their breakpoints."""

    slopes, neg_intercepts = lower_hull_1d(f.slopes[:, 0], -f.intercepts)
    intercepts = -neg_intercepts
    breakpoints = -np.diff(intercepts) / np.diff(slopes)
    return slopes, intercepts, breakpoints


def _star_max_affine_1d(f: MaxAffine, q: DiscreteMeasure) -> MaxAffine:
    slopes, intercepts, breaks = hull_pieces_1d(f)
    z, u = q.points_1d, q.weights
    if breaks.size == 0:
        return MaxAffine([[slopes[0]]], [slopes[0] * float(u @ z) + intercepts[0]])
    merged = np.unique((breaks[None, :] - z[:, None]).reshape(-1))
    samples = np.concatenate(([merged[0] - 1.0], 0.5 * (merged[:-1] + merged[1:]), [merged[-1] + 1.0]))
    active = np.searchsorted(breaks, samples[:, None] + z[None, :], side="right")
    new_slopes = (slopes[active] * u).sum(axis=1)
    new_intercepts = ((slopes[active] * z + intercepts[active]) * u).sum(axis=1)
    return MaxAffine(new_slopes[:, None], new_intercepts)


def evaluate(f: ConvexFunction, y) -> float:
    return f.value(_as_point(y, f.dim))


def grad_select(f: ConvexFunction, y) -> np.ndarray:
    """Subgradient selection: average of active slopes at ties, exact gradient when smooth."""

    return f.gradient(_as_point(y, f.dim))


def conjugate(f: ConvexFunction) -> ConvexFunction:
    """Legendre–Fenchel conjugate; exact where a closed form exists, an oracle otherwise."""

    if isinstance(f, ValuesAtPoints):
        return MaxAffine(f.points, -f.fvalues)
    if isinstance(f, PiecewiseLinear):
        return MaxAffine(f.knots[:, None], -f.fvalues)
    if isinstance(f, MaxAffine) and f.dim == 1:
        knots, values = lower_hull_1d(f.slopes[:, 0], -f.intercepts)
        return PiecewiseLinear(knots, values)
    if isinstance(f, ConjugateOracle):
        return f.base
    return ConjugateOracle(f)


def star(f: ConvexFunction, q: DiscreteMeasure) -> ConvexFunction:
    """(f ⋆ q)(y) = ∫ f(y + z) q(dz)."""

    if f.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {f.dim} != {q.dim}")
    if isinstance(f, ValuesAtPoints):
        raise InputError("a ValuesAtPoints function cannot be shift-integrated (domain too thin)")
    if isinstance(f, MaxAffine):
        if f.dim == 1:
            return _star_max_affine_1d(f, q)
        if q.size == 1:
            return MaxAffine(f.slopes, f.intercepts + f.slopes @ q.atoms[0])
    return StarOracle(f, q)


def convex_hull(g: ValuesAtPoints) -> ConvexFunction:
    """Greatest convex minorant of a function given by values at finitely many points."""

    if g.dim == 1:
        knots, values = lower_hull_1d(g.points[:, 0], g.fvalues)
        return PiecewiseLinear(knots, values)
    logger.debug("Convex hull in d=%s via the biconjugate LP", g.dim)
    return ConjugateOracle(MaxAffine(g.points, -g.fvalues))


__all__ = [
    "ConvexFunction",
    "MaxAffine",
    "ValuesAtPoints",
    "PiecewiseLinear",
    "SmoothQuadLSE",
    "StarOracle",
    "ConjugateOracle",
    "in_open_hull",
    "solve_gradient_equation",
    "lower_hull_1d",
    "hull_pieces_1d",
    "evaluate",
    "grad_select",
    "conjugate",
    "star",
    "convex_hull",
]
