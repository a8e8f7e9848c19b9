"""Command-line entrypoint for qbass."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:  # pragma: no cover - import resolution differs across Pydantic versions
    from pydantic.v1 import ValidationError
except ImportError:  # Pydantic 1.x
    from pydantic import ValidationError  # type: ignore

from .. import __version__
from .config import get_settings
from .errors import ConvexOrderError, DomainError, InputError
from .models.schemas import (
    DualConfig,
    FixedPointConfig,
    FunctionModel,
    InstanceModel,
    MeasureModel,
    PairModel,
    RunResult,
    jsonable,
)
from .services import bass, measures, ot, quantize, solver
from .services.convexfn import ConvexFunction
from .services.measures import DiscreteMeasure, MartingaleKernel
from .services.plotting import plot_measures

logger = logging.getLogger(__name__)

Table = Tuple[List[str], List[List[Any]]]


@dataclass
class Outcome:
    """Result of one command: JSON payload, optional CSV table and exit code."""

    results: Dict[str, Any]
    table: Optional[Table] = None
    exit_code: int = 0


def _read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _digest(command: str, inputs: Sequence[Any], params: Dict[str, Any]) -> str:
    canonical = json.dumps(
        {"command": command, "inputs": list(inputs), "params": params},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _kernel_table(kernel: MartingaleKernel) -> Table:
    joint = kernel.joint()
    rows = [[int(i), int(j), float(joint[i, j])] for i, j in zip(*np.nonzero(joint > 0.0))]
    return ["i", "j", "mass"], rows


def _write_kernel_csv(path: Optional[str], kernel: MartingaleKernel) -> None:
    if path:
        header, rows = _kernel_table(kernel)
        Path(path).write_text(_render_csv((header, rows)), encoding="utf-8")
        logger.info("Wrote kernel to %s", path)


def _render_csv(table: Table) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table[0])
    writer.writerows([[repr(v) if isinstance(v, float) else v for v in row] for row in table[1]])
    return buffer.getvalue()


def _scalar_table(results: Dict[str, Any]) -> Table:
    rows = [[key, value] for key, value in results.items() if not isinstance(value, (dict, list))]
    return ["key", "value"], rows


def _measure_table(p: DiscreteMeasure) -> Table:
    header = ["weight"] + [f"x{axis}" for axis in range(p.dim)]
    return header, [[float(w)] + [float(a) for a in atom] for w, atom in zip(p.weights, p.atoms)]


def _plot(args: argparse.Namespace, series, potential: Optional[ConvexFunction] = None) -> None:
    if getattr(args, "plot", None):
        plot_measures(Path(args.plot), series, potential=potential, title=args.command)


def _load_measure(path: str) -> Tuple[Any, DiscreteMeasure]:
    raw = _read_json(path)
    return raw, MeasureModel.parse_obj(raw).to_domain()


def _load_instance(path: str, *required: str) -> Tuple[Any, InstanceModel]:
    raw = _read_json(path)
    instance = InstanceModel.parse_obj(raw)
    try:
        instance.require(*required)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return raw, instance


def _config(model, instance: InstanceModel, overrides: Dict[str, Any]):
    values = {key: value for key, value in instance.config.items() if key in model.__fields__}
    values.update({key: value for key, value in overrides.items() if value is not None})
    return model(**values)


def cmd_check_order(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw_mu, mu = _load_measure(args.mu)
    raw_nu, nu = _load_measure(args.nu)
    _plot(args, [("mu", mu), ("nu", nu)])
    result = measures.check_convex_order(mu, nu)
    if not result.ordered:
        raise ConvexOrderError("mu and nu are not in convex order")
    payload = {"ordered": True, "witness": result.witness.rows}
    return [raw_mu, raw_nu], Outcome(payload, _kernel_table(result.witness))


def cmd_irreducible(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw_mu, mu = _load_measure(args.mu)
    raw_nu, nu = _load_measure(args.nu)
    result = measures.check_irreducible(mu, nu)
    payload: Dict[str, Any] = {"irreducible": result.irreducible, "lp_solves": result.lp_solves}
    if result.blocking_pair is not None:
        payload["blocking_pair"] = [result.blocking_pair[0], result.blocking_pair[1]]
    return [raw_mu, raw_nu], Outcome(payload)


def cmd_mcov(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw_p, p = _load_measure(args.p)
    raw_q, q = _load_measure(args.q)
    _plot(args, [("p", p), ("q", q)])
    result = ot.mcov(p, q)
    table = (["i", "j", "mass"], [list(t) for t in result.coupling.triples()])
    return [raw_p, raw_q], Outcome({"value": result.value, "coupling": result.coupling.mass}, table)


def cmd_solve_primal(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, instance = _load_instance(args.instance, "nu", "q")
    mu, nu, q = instance.mu.to_domain(), instance.nu.to_domain(), instance.q.to_domain()
    _plot(args, [("mu", mu), ("nu", nu)])
    result = solver.solve_primal_lp(mu, nu, q)
    _write_kernel_csv(args.kernel_csv, result.kernel)
    residuals = result.kernel.residuals()
    payload = {
        "value": result.value,
        "kernel": result.kernel.rows,
        "kernel_residuals": {
            "row_sum": residuals.row_sum,
            "barycenter": residuals.barycenter,
            "marginal": residuals.marginal,
        },
    }
    return [raw], Outcome(payload, _kernel_table(result.kernel))


def cmd_solve_dual(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, instance = _load_instance(args.instance, "nu", "q")
    mu, nu, q = instance.mu.to_domain(), instance.nu.to_domain(), instance.q.to_domain()
    config = _config(DualConfig, instance, {"method": args.method, "gap_tol": args.tol, "max_iter": args.max_iter})
    result = solver.solve_dual(mu, nu, q, config)
    payload = {
        "value": result.value,
        "psi": FunctionModel.from_domain(result.psi.function),
        "iterations": result.iterations,
        "gap": result.gap,
        "converged": result.converged,
        "method": result.method,
        "primal_value": result.primal_value,
    }
    header = ["j"] + [f"y{axis}" for axis in range(nu.dim)] + ["psi"]
    table = (header, [[j] + y.tolist() + [float(v)] for j, (y, v) in enumerate(zip(nu.atoms, result.psi.values))])
    return [raw], Outcome(payload, table)


def cmd_build_bass(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, instance = _load_instance(args.instance, "q", "potential")
    mu, q = instance.mu.to_domain(), instance.q.to_domain()
    generated = bass.generate_from_v(instance.potential.to_domain(), mu, q)
    _plot(args, [("mu", mu), ("nu", generated.nu), ("alpha", generated.pair.alpha_hat)], generated.pair.v_hat)
    _write_kernel_csv(args.kernel_csv, generated.kernel)
    payload = {
        "pair": PairModel.from_domain(generated.pair, q, mu=mu, nu=generated.nu),
        "nu": MeasureModel.from_domain(generated.nu),
        "kernel": generated.kernel.rows,
    }
    return [raw], Outcome(payload, _kernel_table(generated.kernel))


def _load_pair(path: str):
    raw = _read_json(path)
    model = PairModel.parse_obj(raw)
    return raw, model, model.to_domain(), model.q.to_domain()


def cmd_verify_bass(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, model, pair, q = _load_pair(args.pair)
    inputs = [raw]
    if args.instance:
        raw_instance, instance = _load_instance(args.instance, "nu")
        inputs.append(raw_instance)
        mu, nu = instance.mu.to_domain(), instance.nu.to_domain()
        if instance.q is not None:
            q = instance.q.to_domain()
    elif model.mu is not None and model.nu is not None:
        mu, nu = model.mu.to_domain(), model.nu.to_domain()
    else:
        raise InputError("verify-bass needs mu and nu, in the pair file or an instance file")
    tol = args.tol if args.tol is not None else 1e-7
    report = bass.verify_bass(pair, mu, nu, q, tol)
    payload = {
        "passed": report.passed,
        "w2_mu": report.w2_mu,
        "w2_nu": report.w2_nu,
        "barycenter_residual": report.barycenter_residual,
        "tol": report.tol,
    }
    return inputs, Outcome(payload, exit_code=0 if report.passed else 1)


def cmd_fixpoint(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, instance = _load_instance(args.instance, "nu", "q")
    mu, nu, q = instance.mu.to_domain(), instance.nu.to_domain(), instance.q.to_domain()
    config = _config(
        FixedPointConfig,
        instance,
        {"tol": args.tol, "max_iter": args.max_iter, "pieces": args.pieces, "epsilon": args.epsilon},
    )
    result = bass.fixed_point_solve(mu, nu, q, config)
    _plot(args, [("mu", mu), ("nu", nu), ("alpha", result.pair.alpha_hat)], result.pair.v_hat)
    payload = {
        "converged": result.converged,
        "iterations": result.iterations,
        "residuals": result.residuals,
        "nu_residuals": result.nu_residuals,
        "mu_residuals": result.mu_residuals,
        "pair": PairModel.from_domain(result.pair, q, mu=mu, nu=nu),
    }
    table = (
        ["iteration", "residual", "w2_nu", "w2_mu"],
        [
            [n + 1, r, rn, rm]
            for n, (r, rn, rm) in enumerate(zip(result.residuals, result.nu_residuals, result.mu_residuals))
        ],
    )
    return [raw], Outcome(payload, table)


def cmd_simulate(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    raw, _, pair, q = _load_pair(args.pair)
    seed = args.seed if args.seed is not None else 0
    paths = bass.simulate(pair, q, args.paths, seed)
    rows = paths.rows().tolist()
    for row in rows:
        row[0] = int(row[0])
    increments = paths.x1 - paths.x0
    payload = {
        "n_paths": len(paths),
        "seed": seed,
        "mean_increment": increments.mean(axis=0),
        "columns": paths.columns(),
        "rows": rows,
    }
    return [raw], Outcome(payload, (paths.columns(), rows))


def cmd_quantize_gaussian(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    p = quantize.quantize_gaussian(args.m, args.sigma)
    _plot(args, [("gaussian", p)])
    payload = {"measure": MeasureModel.from_domain(p), "second_moment": p.second_moment()}
    return [], Outcome(payload, _measure_table(p))


def cmd_quantize_laplace(args: argparse.Namespace) -> Tuple[List[Any], Outcome]:
    p = quantize.quantize_laplace(args.m, args.left_scale, args.right_scale)
    _plot(args, [("laplace", p)])
    payload = {
        "measure": MeasureModel.from_domain(p),
        "barycenter": p.barycenter(),
        "second_moment": p.second_moment(),
    }
    return [], Outcome(payload, _measure_table(p))


COMMANDS = {
    "check-order": cmd_check_order,
    "irreducible": cmd_irreducible,
    "mcov": cmd_mcov,
    "solve-primal": cmd_solve_primal,
    "solve-dual": cmd_solve_dual,
    "build-bass": cmd_build_bass,
    "verify-bass": cmd_verify_bass,
    "fixpoint": cmd_fixpoint,
    "simulate": cmd_simulate,
    "quantize-gaussian": cmd_quantize_gaussian,
    "quantize-laplace": cmd_quantize_laplace,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--plot", metavar="PATH.svg", help="emit an SVG chart of the 1D measures involved")
    common.add_argument("--timing", action="store_true", help="include wall_time in the JSON envelope")

    parser = argparse.ArgumentParser(prog="qbass", description="Martingale transport with a reference measure q")
    parser.add_argument("--version", action="version", version=f"qbass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("check-order", "irreducible"):
        cmd = sub.add_parser(name, parents=[common])
        cmd.add_argument("mu")
        cmd.add_argument("nu")

    cmd = sub.add_parser("mcov", parents=[common], help="maximal covariance of two measures")
    cmd.add_argument("p")
    cmd.add_argument("q")

    cmd = sub.add_parser("solve-primal", parents=[common])
    cmd.add_argument("instance")
    cmd.add_argument("--kernel-csv", metavar="PATH")

    cmd = sub.add_parser("solve-dual", parents=[common])
    cmd.add_argument("instance")
    cmd.add_argument("--method", choices=("subgradient", "lp"))
    cmd.add_argument("--tol", type=float)
    cmd.add_argument("--max-iter", type=int)

    cmd = sub.add_parser("build-bass", parents=[common])
    cmd.add_argument("instance")
    cmd.add_argument("--kernel-csv", metavar="PATH")

    cmd = sub.add_parser("verify-bass", parents=[common])
    cmd.add_argument("pair")
    cmd.add_argument("instance", nargs="?")
    cmd.add_argument("--tol", type=float)

    cmd = sub.add_parser("fixpoint", parents=[common])
    cmd.add_argument("instance")
    cmd.add_argument("--tol", type=float)
    cmd.add_argument("--max-iter", type=int)
    cmd.add_argument("--pieces", type=int)
    cmd.add_argument("--epsilon", type=float)

    cmd = sub.add_parser("simulate", parents=[common])
    cmd.add_argument("pair")
    cmd.add_argument("--paths", type=int, default=10000)
    cmd.add_argument("--seed", type=int)

    cmd = sub.add_parser("quantize-gaussian", parents=[common])
    cmd.add_argument("--m", type=int, default=100)
    cmd.add_argument("--sigma", type=float, default=1.0)

    cmd = sub.add_parser("quantize-laplace", parents=[common])
    cmd.add_argument("--m", type=int, default=100)
    cmd.add_argument("--left-scale", type=float, default=1.0)
    cmd.add_argument("--right-scale", type=float, default=1.0)
    return parser


def _params(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"command", "out", "format", "plot", "timing", "kernel_csv"}
    return {key: value for key, value in sorted(vars(args).items()) if key not in skip and key not in _PATH_ARGS}


_PATH_ARGS = {"mu", "nu", "p", "q", "instance", "pair"}


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info("Wrote %s", args.out)
    else:
        sys.stdout.write(text)


def _configure_logging() -> None:
    level = getattr(logging, get_settings().log.upper(), logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns 0 on success, 1 on domain errors, 2 on input errors."""

    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.debug("%s %s: %s", get_settings().app_name, __version__, args.command)
    started = time.perf_counter()
    try:
        inputs, outcome = COMMANDS[args.command](args)
        if args.format == "csv":
            table = outcome.table or _scalar_table(jsonable(outcome.results))
            text = _render_csv(table)
        else:
            envelope = RunResult(
                command=args.command,
                version=__version__,
                digest=_digest(args.command, inputs, jsonable(_params(args))),
                results=jsonable(outcome.results),
                wall_time=time.perf_counter() - started if args.timing else None,
            )
            text = json.dumps(jsonable(envelope), indent=2, sort_keys=True) + "\n"
        _emit(args, text)
        return outcome.exit_code
    except DomainError as exc:
        logger.debug("Domain error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InputError, ValidationError, ValueError, OSError) as exc:
        logger.debug("Input error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
