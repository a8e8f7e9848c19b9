"""Bass martingales with a general reference measure: generation, verification, simulation.

A pair (v, alpha) is a Bass pair for (mu, nu) when pushing alpha through grad(v ⋆ q)
gives mu and pushing alpha * q through grad v gives nu. For a starting law X0 = x the
terminal law is then grad v(a + Z) with a the preimage of x, which has barycenter x.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.optimize import isotonic_regression

from ..config import get_settings
from ..errors import ConvergenceError, DimensionError, DomainError, GeneratingError, InputError
from ..models.schemas import FixedPointConfig
from .convexfn import ConvexFunction, MaxAffine, SmoothQuadLSE, StarOracle, in_open_hull, solve_gradient_equation
from .measures import DiscreteMeasure, MartingaleKernel, convolve, require_convex_order
from .ot import brenier_map, mcov, wasserstein2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BassDiagnostics:
    w2_mu: float
    w2_nu: float
    strict_convexity_margin: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class BassPair:
    v_hat: ConvexFunction
    alpha_hat: DiscreteMeasure
    diagnostics: Optional[BassDiagnostics] = None


@dataclass(frozen=True)
class GeneratingReport:
    interior_ok: bool
    strictly_convex: bool
    gradient_exchange_ok: bool
    finite_second_moment: bool
    margin: float
    exchange_error: float
    messages: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.interior_ok and self.strictly_convex and self.gradient_exchange_ok and self.finite_second_moment


def _gradient_points(v: ConvexFunction) -> Optional[np.ndarray]:
    if isinstance(v, SmoothQuadLSE):
        return v.slope_points()
    if isinstance(v, MaxAffine):
        return v.slopes
    return None


def _complex_step_gradient(v: SmoothQuadLSE, q: DiscreteMeasure, y: np.ndarray, h: float = 1e-20) -> np.ndarray:
    grad = np.empty(v.dim)
    for axis in range(v.dim):
        shift = np.zeros(v.dim, dtype=complex)
        shift[axis] = 1j * h
        total = sum(u * v.analytic_value(y + z + shift) for u, z in zip(q.weights, q.atoms))
        grad[axis] = total.imag / h
    return grad


def check_generating(
    v_hat: ConvexFunction,
    mu: DiscreteMeasure,
    q: DiscreteMeasure,
    *,
    samples: int = 50,
    tol: float = 1e-8,
    seed: int = 0,
) -> GeneratingReport:
    """Check that v_hat is Bass generating for mu; failures are reported, never raised."""

    messages: List[str] = []
    if v_hat.dim != mu.dim or mu.dim != q.dim:
        raise DimensionError(f"dimension mismatch: {v_hat.dim}, {mu.dim}, {q.dim}")

    # the gradient range of v is the interior of the hull of these points (R^d when None)
    points = _gradient_points(v_hat)
    interior_ok = True
    if points is not None:
        interior_ok = all(in_open_hull(x, points) for x in mu.atoms)
    if not interior_ok:
        messages.append("some atom of mu lies outside the interior of the gradient range of v")

    margin = v_hat.strict_convexity_margin()
    strictly_convex = margin > 0.0
    if not strictly_convex:
        messages.append("v is not strictly convex (margin 0)")

    exchange_error = float("nan")
    exchange_ok = False
    finite = True
    if isinstance(v_hat, SmoothQuadLSE):
        rng = np.random.default_rng(seed)
        lo = mu.atoms.min(axis=0) - 1.0
        hi = mu.atoms.max(axis=0) + 1.0
        star = StarOracle(v_hat, q)
        errors = []
        for y in rng.uniform(lo, hi, size=(samples, mu.dim)):
            errors.append(float(np.max(np.abs(_complex_step_gradient(v_hat, q, y) - star.gradient(y)))))
        exchange_error = max(errors)
        exchange_ok = exchange_error <= tol
        finite = bool(np.all(np.isfinite(v_hat.gradients(mu.atoms))))
    else:
        messages.append(f"{v_hat.kind} is not differentiable; gradient exchange not available")
    if isinstance(v_hat, SmoothQuadLSE) and not exchange_ok:
        messages.append(f"gradient exchange error {exchange_error:.3e} above {tol}")

    return GeneratingReport(
        interior_ok=interior_ok,
        strictly_convex=strictly_convex,
        gradient_exchange_ok=exchange_ok,
        finite_second_moment=finite,
        margin=margin,
        exchange_error=exchange_error,
        messages=messages,
    )


def _invert(star: StarOracle, points: np.ndarray) -> np.ndarray:
    """Preimages of ``points`` under grad(v ⋆ q), one independent solve per point."""

    def solve(x: np.ndarray) -> np.ndarray:
        try:
            return solve_gradient_equation(star, x)
        except ConvergenceError as exc:
            raise ConvergenceError(f"inverting grad(v ⋆ q) at atom {x.tolist()} failed: {exc}") from exc

    workers = get_settings().workers
    if workers > 1 and points.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.vstack(list(pool.map(solve, points)))
    return np.vstack([solve(x) for x in points])


@dataclass(frozen=True)
class GeneratedBass:
    pair: BassPair
    nu: DiscreteMeasure
    kernel: MartingaleKernel


def generate_from_v(v_hat: ConvexFunction, mu: DiscreteMeasure, q: DiscreteMeasure) -> GeneratedBass:
    """Build alpha = grad(v ⋆ q)^{-1}(mu), nu = grad v(alpha * q) and the Bass kernel."""

    if not isinstance(v_hat, SmoothQuadLSE):
        raise GeneratingError(f"generation needs a SmoothQuadLSE potential, got {v_hat.kind}")
    report = check_generating(v_hat, mu, q)
    if not report.passed:
        raise GeneratingError("; ".join(report.messages))

    d, K = mu.dim, q.size
    star = StarOracle(v_hat, q)
    preimages = _invert(star, mu.atoms)
    alpha = DiscreteMeasure(preimages, mu.weights)

    images = v_hat.gradients((preimages[:, None, :] + q.atoms[None, :, :]).reshape(-1, d))
    nu = DiscreteMeasure(images, np.outer(mu.weights, q.weights).reshape(-1))
    located = nu.locate(images, tol=max(1e3 * get_settings().merge_tol, 1e-9)).reshape(mu.size, K)
    rows = np.zeros((mu.size, nu.size))
    for i in range(mu.size):
        np.add.at(rows[i], located[i], q.weights)
    kernel = MartingaleKernel(base=mu, target=nu, rows=rows)

    diagnostics = BassDiagnostics(
        w2_mu=wasserstein2(DiscreteMeasure(star.gradients(preimages), mu.weights), mu),
        w2_nu=wasserstein2(DiscreteMeasure(images, np.outer(mu.weights, q.weights).reshape(-1)), nu),
        strict_convexity_margin=report.margin,
    )
    logger.info(
        "Generated Bass pair: |alpha|=%s, |nu|=%s, w2_mu=%.3e", alpha.size, nu.size, diagnostics.w2_mu
    )
    return GeneratedBass(pair=BassPair(v_hat, alpha, diagnostics), nu=nu, kernel=kernel)


@dataclass(frozen=True)
class VerificationReport:
    w2_mu: float
    w2_nu: float
    barycenter_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.w2_mu, self.w2_nu, self.barycenter_residual) <= self.tol


def verify_bass(
    pair: BassPair, mu: DiscreteMeasure, nu: DiscreteMeasure, q: DiscreteMeasure, tol: float
) -> VerificationReport:
    """Check both pushforward identities and the martingale barycenter condition."""

    v, alpha = pair.v_hat, pair.alpha_hat
    star = StarOracle(v, q)
    starts = star.gradients(alpha.atoms)
    w2_mu = wasserstein2(DiscreteMeasure(starts, alpha.weights), mu)
    beta = convolve(alpha, q)
    w2_nu = wasserstein2(DiscreteMeasure(v.gradients(beta.atoms), beta.weights), nu)

    if isinstance(v, SmoothQuadLSE):
        try:
            preimages = _invert(star, mu.atoms)
            residual = float(np.max(np.abs(star.gradients(preimages) - mu.atoms)))
        except (ConvergenceError, DomainError) as exc:
            logger.warning("Barycenter check failed: %s", exc)
            residual = float("inf")
    else:
        # each kernel row is attached to the atom of mu its barycenter lands on
        dist = np.max(np.abs(starts[:, None, :] - mu.atoms[None, :, :]), axis=2)
        residual = float(np.max(dist.min(axis=1)))
    return VerificationReport(w2_mu=w2_mu, w2_nu=w2_nu, barycenter_residual=residual, tol=tol)


@dataclass(frozen=True)
class PathTable:
    alpha_index: np.ndarray
    q_index: np.ndarray
    a: np.ndarray
    z: np.ndarray
    x0: np.ndarray
    x1: np.ndarray

    def __len__(self) -> int:
        return int(self.alpha_index.shape[0])

    def columns(self) -> List[str]:
        dim = self.a.shape[1]
        names = ["path"]
        for label in ("a", "z", "x0", "x1"):
            names.extend([label] if dim == 1 else [f"{label}_{axis}" for axis in range(dim)])
        return names

    def rows(self) -> np.ndarray:
        return np.column_stack([np.arange(len(self)), self.a, self.z, self.x0, self.x1])


def simulate(pair: BassPair, q: DiscreteMeasure, n_paths: int, seed: int) -> PathTable:
    """Sample (A, Z, X0, X1) with X0 = grad(v ⋆ q)(A) and X1 = grad v(A + Z)."""

    if int(n_paths) != n_paths or n_paths <= 0:
        raise InputError(f"n_paths must be a positive integer, got {n_paths!r}")
    settings = get_settings()
    alpha, v = pair.alpha_hat, pair.v_hat
    d = alpha.dim
    starts = StarOracle(v, q).gradients(alpha.atoms)
    ends = v.gradients((alpha.atoms[:, None, :] + q.atoms[None, :, :]).reshape(-1, d)).reshape(alpha.size, q.size, d)

    chunks = max(1, min(settings.simulation_chunks, int(n_paths)))
    counts = [len(part) for part in np.array_split(np.arange(int(n_paths)), chunks)]
    streams = np.random.SeedSequence(seed).spawn(chunks)

    def draw(job):
        stream, count = job
        rng = np.random.default_rng(stream)
        return rng.choice(alpha.size, size=count, p=alpha.weights), rng.choice(q.size, size=count, p=q.weights)

    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        draws = list(pool.map(draw, zip(streams, counts)))
    alpha_index = np.concatenate([a for a, _ in draws])
    q_index = np.concatenate([k for _, k in draws])
    return PathTable(
        alpha_index=alpha_index,
        q_index=q_index,
        a=alpha.atoms[alpha_index],
        z=q.atoms[q_index],
        x0=starts[alpha_index],
        x1=ends[alpha_index, q_index],
    )


def kernel_value(kernel: MartingaleKernel, q: DiscreteMeasure) -> float:
    """sum_i m_i MCov(pi_i, q): the primal objective of a given kernel."""

    return float(sum(w * mcov(kernel.row(i), q).value for i, w in enumerate(kernel.base.weights)))


@dataclass(frozen=True)
class FixedPointResult:
    pair: BassPair
    converged: bool
    residuals: List[float]
    nu_residuals: List[float]
    mu_residuals: List[float]

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def _fit_potential(points: np.ndarray, weights: np.ndarray, targets: np.ndarray, config: FixedPointConfig) -> SmoothQuadLSE:
    """Smooth convex potential whose gradient approximates a monotone map on sorted ``points``."""

    eps = config.epsilon
    residual = isotonic_regression(targets - eps * points, weights=weights).x
    starts = np.concatenate(([True], np.diff(residual) > 1e-14))
    cells = np.cumsum(starts) - 1
    if cells[-1] + 1 > config.pieces:
        cumulative = np.cumsum(weights) - 0.5 * weights
        cells = np.minimum((cumulative * config.pieces).astype(int), config.pieces - 1)
        cells = np.cumsum(np.concatenate(([True], np.diff(cells) > 0))) - 1
    count = cells[-1] + 1
    mass = np.bincount(cells, weights=weights, minlength=count)
    slopes = np.bincount(cells, weights=weights * residual, minlength=count) / mass
    if count == 1:
        return SmoothQuadLSE(eps, slopes[:, None], [0.0], config.beta)

    last = np.flatnonzero(np.diff(cells) > 0)
    kinks = 0.5 * (points[last] + points[last + 1])
    gaps = points[last + 1] - points[last]
    jumps = np.diff(slopes)
    intercepts = np.concatenate(([0.0], np.cumsum(-jumps * kinks)))
    positive = jumps > 0
    beta = config.beta
    if np.any(positive):
        beta = min(beta, float(np.min(jumps[positive] * gaps[positive])) / 40.0)
    beta = max(beta, 1e-12)
    return SmoothQuadLSE(eps, slopes[:, None], intercepts, beta)


def fixed_point_solve(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    q: DiscreteMeasure,
    config: Optional[FixedPointConfig] = None,
) -> FixedPointResult:
    """Search a Bass pair for (mu, nu) by alternating a Brenier step and an inversion step (d = 1)."""

    config = config or FixedPointConfig()
    if not mu.dim == nu.dim == q.dim == 1:
        raise DimensionError("the fixed-point solver works on R only")
    if nu.size == 1 and mu.size > 1:
        raise DomainError("degenerate nu: a single atom cannot be reached from a non-Dirac mu")
    require_convex_order(mu, nu)

    alpha = mu
    residuals: List[float] = []
    nu_residuals: List[float] = []
    mu_residuals: List[float] = []
    pair: Optional[BassPair] = None
    converged = False
    for iteration in range(1, config.max_iter + 1):
        beta = convolve(alpha, q)
        transport = brenier_map(beta, nu)
        v = _fit_potential(beta.points_1d, beta.weights, transport.images[:, 0], config)
        star = StarOracle(v, q)
        preimages = _invert(star, mu.atoms)
        next_alpha = DiscreteMeasure(preimages, mu.weights)

        r_nu = wasserstein2(DiscreteMeasure(v.gradients(beta.atoms), beta.weights), nu)
        r_mu = wasserstein2(DiscreteMeasure(star.gradients(preimages), mu.weights), mu)
        residuals.append(r_nu + r_mu)
        nu_residuals.append(r_nu)
        mu_residuals.append(r_mu)
        pair = BassPair(v, next_alpha, BassDiagnostics(r_mu, r_nu, v.strict_convexity_margin()))
        logger.debug("Fixed-point iteration %s: residual %.3e (%s pieces)", iteration, residuals[-1], v.slopes.shape[0])
        alpha = next_alpha
        if residuals[-1] <= config.tol:
            converged = True
            break

    if converged:
        logger.info("Fixed point reached after %s iterations (residual %.3e)", len(residuals), residuals[-1])
    else:
        logger.warning("Fixed-point iteration did not converge; last residual %.3e", residuals[-1])
    return FixedPointResult(
        pair=pair,  # type: ignore[arg-type]
        converged=converged,
        residuals=residuals,
        nu_residuals=nu_residuals,
        mu_residuals=mu_residuals,
    )


__all__ = [
    "BassDiagnostics",
    "BassPair",
    "GeneratingReport",
    "GeneratedBass",
    "VerificationReport",
    "PathTable",
    "FixedPointResult",
    "check_generating",
    "generate_from_v",
    "verify_bass",
    "simulate",
    "kernel_value",
    "fixed_point_solve",
]
