"""Thin wrapper around the HiGHS linear programming backend."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..config import get_settings
from ..errors import ConvergenceError

logger = logging.getLogger(__name__)

Bounds = Union[Tuple[Optional[float], Optional[float]], Sequence[Tuple[Optional[float], Optional[float]]]]

_STATUS_INFEASIBLE = 2
_STATUS_UNBOUNDED = 3
_STATUS_AMBIGUOUS = 4


@dataclass
class LpSolution:
    """Primal point, objective and equality duals of a solved program."""

    status: int
    message: str
    x: Optional[np.ndarray] = None
    value: float = float("nan")
    eq_duals: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.status == 0

    @property
    def infeasible(self) -> bool:
        return self.status == _STATUS_INFEASIBLE


def _linprog(objective, A_eq, b_eq, A_ub, b_ub, bounds, *, presolve: bool):
    tol = get_settings().lp_tol
    return linprog(
        objective,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
        options={
            "presolve": presolve,
            "primal_feasibility_tolerance": tol,
            "dual_feasibility_tolerance": tol,
        },
    )


def solve_lp(
    c: np.ndarray,
    A_eq: Optional[Union[np.ndarray, sparse.spmatrix]],
    b_eq: Optional[np.ndarray],
    *,
    A_ub: Optional[Union[np.ndarray, sparse.spmatrix]] = None,
    b_ub: Optional[np.ndarray] = None,
    bounds: Bounds = (0.0, None),
    maximize: bool = False,
) -> LpSolution:
    """Solve ``min/max c.x`` subject to linear equalities with the dual simplex.

    ``eq_duals`` are the sensitivities of the returned objective value with respect to
    ``b_eq`` (already sign-corrected when ``maximize`` is set). Infeasible programs are
    returned with ``status == 2``, programs the backend can only classify as
    "unbounded or infeasible" with ``status == 4``; any other failure raises
    ``ConvergenceError``.
    """

    objective = -np.asarray(c, dtype=float) if maximize else np.asarray(c, dtype=float)
    res = _linprog(objective, A_eq, b_eq, A_ub, b_ub, bounds, presolve=True)
    if res.status == _STATUS_AMBIGUOUS:
        # presolve could not tell infeasible from unbounded
        res = _linprog(objective, A_eq, b_eq, A_ub, b_ub, bounds, presolve=False)
    if res.status == _STATUS_INFEASIBLE:
        logger.debug("LP infeasible: %s", res.message)
        return LpSolution(status=res.status, message=res.message)
    if res.status == _STATUS_UNBOUNDED:
        logger.debug("LP unbounded: %s", res.message)
        return LpSolution(status=res.status, message=res.message, value=float("inf") if maximize else -float("inf"))
    if res.status == _STATUS_AMBIGUOUS and "unbounded or infeasible" in res.message.lower():
        logger.debug("LP unbounded or infeasible: %s", res.message)
        return LpSolution(status=res.status, message=res.message)
    if res.status != 0:
        raise ConvergenceError(f"linear program did not solve: {res.message}")

    sign = -1.0 if maximize else 1.0
    duals = None
    if getattr(res, "eqlin", None) is not None:
        duals = sign * np.asarray(res.eqlin.marginals, dtype=float)
    return LpSolution(
        status=0,
        message=res.message,
        x=np.asarray(res.x, dtype=float),
        value=sign * float(res.fun),
        eq_duals=duals,
    )


__all__ = ["LpSolution", "solve_lp"]
