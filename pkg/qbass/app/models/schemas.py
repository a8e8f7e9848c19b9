"""Pydantic schemas for instance files, run parameters and results."""
from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np

try:  # pragma: no cover - import resolution differs across Pydantic versions
    from pydantic.v1 import BaseModel, Field, root_validator, validator
except ImportError:  # Pydantic 1.x
    from pydantic import BaseModel, Field, root_validator, validator  # type: ignore

from ..services.convexfn import (
    ConvexFunction,
    MaxAffine,
    PiecewiseLinear,
    SmoothQuadLSE,
    ValuesAtPoints,
)
from ..services.measures import DiscreteMeasure

SCHEMA_VERSION = 1

Point = List[float]


class _WireModel(BaseModel):
    class Config:
        extra = "forbid"
        allow_population_by_field_name = True


class DualConfig(_WireModel):
    """Parameters of the dual solve."""

    method: Literal["subgradient", "lp"] = Field("subgradient", description="Subgradient descent or LP duals")
    gap_tol: float = Field(1e-5, gt=0, description="Stop once F(psi) - P falls below this gap")
    max_iter: int = Field(20000, ge=1, description="Iteration cap of the subgradient loop")
    step0: float = Field(1.0, gt=0, description="Initial step of the diminishing schedule")


class FixedPointConfig(_WireModel):
    """Parameters of the Bass fixed-point iteration."""

    tol: float = Field(5e-3, gt=0, description="Residual at which the iteration stops")
    max_iter: int = Field(500, ge=1, description="Iteration cap")
    pieces: int = Field(32, ge=1, description="Maximal number of affine pieces of the fitted potential")
    epsilon: float = Field(1e-3, gt=0, description="Quadratic coefficient of the fitted potential")
    beta: float = Field(1e-2, gt=0, description="Upper bound on the smoothing temperature of the fit")


class MeasureModel(_WireModel):
    """{"schema": 1, "d": d, "atoms": [[...], ...], "weights": [...]}"""

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    d: int = Field(..., ge=1)
    atoms: List[Point]
    weights: List[float]

    @validator("atoms", pre=True)
    def wrap_scalar_atoms(cls, atoms: Any) -> Any:
        if isinstance(atoms, list):
            return [[a] if isinstance(a, (int, float)) else a for a in atoms]
        return atoms

    @root_validator(skip_on_failure=True)
    def check_shapes(cls, values: dict) -> dict:
        atoms, weights, d = values["atoms"], values["weights"], values["d"]
        if not atoms:
            raise ValueError("a measure needs at least one atom")
        if len(atoms) != len(weights):
            raise ValueError(f"got {len(atoms)} atoms but {len(weights)} weights")
        if any(len(atom) != d for atom in atoms):
            raise ValueError(f"every atom must have dimension d={d}")
        return values

    def to_domain(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms, self.weights)

    @classmethod
    def from_domain(cls, p: DiscreteMeasure) -> "MeasureModel":
        return cls(d=p.dim, atoms=p.atoms.tolist(), weights=p.weights.tolist())


_REQUIRED_FIELDS = {
    "max_affine": ("slopes", "intercepts"),
    "values": ("points", "values"),
    "smooth_quad_lse": ("slopes", "intercepts", "epsilon", "beta"),
    "piecewise_linear": ("knots", "values"),
}


class FunctionModel(_WireModel):
    """Tagged convex function: max_affine, values, smooth_quad_lse or piecewise_linear."""

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    type: Literal["max_affine", "values", "smooth_quad_lse", "piecewise_linear"]
    slopes: Optional[List[Union[float, Point]]] = None
    intercepts: Optional[List[float]] = None
    points: Optional[List[Union[float, Point]]] = None
    values: Optional[List[float]] = None
    knots: Optional[List[float]] = None
    epsilon: Optional[float] = Field(None, ge=0)
    beta: Optional[float] = Field(None, gt=0)

    @root_validator(skip_on_failure=True)
    def check_fields(cls, values: dict) -> dict:
        kind = values["type"]
        missing = [name for name in _REQUIRED_FIELDS[kind] if values.get(name) is None]
        if missing:
            raise ValueError(f"{kind} needs fields {missing}")
        return values

    def to_domain(self) -> ConvexFunction:
        if self.type == "max_affine":
            return MaxAffine(self.slopes, self.intercepts)
        if self.type == "values":
            return ValuesAtPoints(self.points, self.values)
        if self.type == "piecewise_linear":
            return PiecewiseLinear(self.knots, self.values)
        return SmoothQuadLSE(self.epsilon, self.slopes, self.intercepts, self.beta)

    @classmethod
    def from_domain(cls, f: ConvexFunction) -> "FunctionModel":
        if isinstance(f, SmoothQuadLSE):
            return cls(
                type="smooth_quad_lse",
                slopes=f.slopes.tolist(),
                intercepts=f.intercepts.tolist(),
                epsilon=f.epsilon,
                beta=f.beta,
            )
        if isinstance(f, MaxAffine):
            return cls(type="max_affine", slopes=f.slopes.tolist(), intercepts=f.intercepts.tolist())
        if isinstance(f, ValuesAtPoints):
            return cls(type="values", points=f.points.tolist(), values=f.fvalues.tolist())
        if isinstance(f, PiecewiseLinear):
            return cls(type="piecewise_linear", knots=f.knots.tolist(), values=f.fvalues.tolist())
        raise TypeError(f"{f.kind} functions have no wire representation")


class InstanceModel(_WireModel):
    """Problem instance: marginals, reference measure, optional potential and run parameters."""

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    mu: MeasureModel
    nu: Optional[MeasureModel] = None
    q: Optional[MeasureModel] = None
    potential: Optional[FunctionModel] = None
    config: Dict[str, Any] = Field(default_factory=dict)

    @root_validator(skip_on_failure=True)
    def check_dimensions(cls, values: dict) -> dict:
        dims = {name: values[name].d for name in ("mu", "nu", "q") if values.get(name) is not None}
        if len(set(dims.values())) > 1:
            raise ValueError(f"measures have different dimensions: {dims}")
        return values

    def require(self, *names: str) -> None:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValueError(f"instance is missing {missing}")


class DiagnosticsModel(_WireModel):
    w2_mu: float
    w2_nu: float
    strict_convexity_margin: float


class PairModel(_WireModel):
    """A Bass pair together with the measures it was built for."""

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    v_hat: FunctionModel
    alpha_hat: MeasureModel
    q: MeasureModel
    mu: Optional[MeasureModel] = None
    nu: Optional[MeasureModel] = None
    diagnostics: Optional[DiagnosticsModel] = None

    def to_domain(self):
        from ..services.bass import BassDiagnostics, BassPair

        diagnostics = None
        if self.diagnostics is not None:
            diagnostics = BassDiagnostics(**self.diagnostics.dict())
        return BassPair(
            v_hat=self.v_hat.to_domain(),
            alpha_hat=self.alpha_hat.to_domain(),
            diagnostics=diagnostics,
        )

    @classmethod
    def from_domain(cls, pair, q: DiscreteMeasure, mu=None, nu=None) -> "PairModel":
        diagnostics = None
        if pair.diagnostics is not None:
            diagnostics = DiagnosticsModel(**pair.diagnostics.as_dict())
        return cls(
            v_hat=FunctionModel.from_domain(pair.v_hat),
            alpha_hat=MeasureModel.from_domain(pair.alpha_hat),
            q=MeasureModel.from_domain(q),
            mu=MeasureModel.from_domain(mu) if mu is not None else None,
            nu=MeasureModel.from_domain(nu) if nu is not None else None,
            diagnostics=diagnostics,
        )


class RunResult(_WireModel):
    """Output envelope of every CLI command."""

    schema_version: int = Field(SCHEMA_VERSION, alias="schema")
    command: str
    version: str
    digest: str
    results: Dict[str, Any]
    wall_time: Optional[float] = None


def jsonable(value: Any) -> Any:
    """Recursively convert numpy values to JSON types, non-finite floats to "+inf"/"-inf"."""

    if isinstance(value, BaseModel):
        return jsonable(value.dict(by_alias=True, exclude_none=True))
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "+inf" if value > 0 else "-inf"
        return value
    return value


__all__ = [
    "SCHEMA_VERSION",
    "DualConfig",
    "FixedPointConfig",
    "MeasureModel",
    "FunctionModel",
    "InstanceModel",
    "DiagnosticsModel",
    "PairModel",
    "RunResult",
    "jsonable",
]
