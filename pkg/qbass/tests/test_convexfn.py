import itertools

import numpy as np
import pytest

from qbass.app.errors import DomainError, InputError
from qbass.app.models.schemas import FunctionModel
from qbass.app.services.convexfn import (
    ConjugateOracle,
    MaxAffine,
    PiecewiseLinear,
    SmoothQuadLSE,
    StarOracle,
    ValuesAtPoints,
    conjugate,
    convex_hull,
    evaluate,
    grad_select,
    in_open_hull,
    lower_hull_1d,
    solve_gradient_equation,
    star,
)
from qbass.app.services.measures import DiscreteMeasure, dirac

from .conftest import symmetric


def abs_value() -> MaxAffine:
    return MaxAffine([[1.0], [-1.0]], [0.0, 0.0])


def three_point() -> ValuesAtPoints:
    return ValuesAtPoints([[-1.0], [0.0], [1.0]], [1.0, 0.0, 1.0])


def test_evaluate_examples():
    assert evaluate(abs_value(), [2.0]) == 2.0
    assert evaluate(three_point(), [0.5]) == np.inf
    assert evaluate(three_point(), [1.0]) == 1.0
    quad = SmoothQuadLSE.quadratic()
    for y in (-1.5, 0.0, 2.0):
        assert evaluate(quad, [y]) == pytest.approx(0.5 * y * y, abs=1e-14)


def test_grad_select_examples():
    assert grad_select(abs_value(), [2.0]).tolist() == [1.0]
    assert grad_select(abs_value(), [0.0]).tolist() == [0.0]
    assert grad_select(SmoothQuadLSE.quadratic(), [0.75])[0] == pytest.approx(0.75)
    with pytest.raises(DomainError):
        grad_select(three_point(), [0.0])


def test_piecewise_linear_selection():
    f = PiecewiseLinear([-1.0, 0.0, 2.0], [1.0, 0.0, 1.0])
    assert f.slopes.tolist() == [-1.0, 0.5]
    assert f.selection(0.0) == pytest.approx(-0.25)
    assert f.selection(1.0) == pytest.approx(0.5)
    assert f.selection(-1.0, allow_boundary=True) == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        f.selection(-1.0)
    with pytest.raises(DomainError):
        f.selection(3.0)
    assert f.value(np.array([3.0])) == np.inf


def test_piecewise_linear_rejects_concave_values():
    with pytest.raises(InputError):
        PiecewiseLinear([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])


def test_values_at_points_rejects_repeated_points():
    with pytest.raises(InputError):
        ValuesAtPoints([[0.0], [0.0]], [1.0, 2.0])


def test_conjugate_of_three_point_function():
    g = conjugate(three_point())
    assert isinstance(g, MaxAffine)
    assert sorted(zip(g.slopes[:, 0], g.intercepts)) == [(-1.0, -1.0), (0.0, 0.0), (1.0, -1.0)]
    for x in (-3.0, -0.5, 0.0, 0.4, 2.5):
        assert evaluate(g, [x]) == pytest.approx(max(abs(x) - 1.0, 0.0))


def test_conjugate_of_abs_is_indicator():
    g = conjugate(abs_value())
    assert isinstance(g, PiecewiseLinear)
    assert evaluate(g, [0.3]) == 0.0
    assert evaluate(g, [-1.0]) == 0.0
    assert evaluate(g, [1.5]) == np.inf


def test_conjugate_of_quadratic_is_quadratic():
    g = conjugate(SmoothQuadLSE.quadratic())
    for x in (-2.0, -1.0, 0.0, 1.0, 2.0):
        assert evaluate(g, [x]) == pytest.approx(0.5 * x * x, abs=1e-8)
        assert grad_select(g, [x])[0] == pytest.approx(x, abs=1e-8)


def test_conjugate_of_bounded_gradient_function_has_bounded_domain():
    f = SmoothQuadLSE(0.0, [[-1.0], [1.0]], [0.0, 0.0], 0.5)
    g = conjugate(f)
    assert np.isfinite(evaluate(g, [0.5]))
    assert evaluate(g, [2.0]) == np.inf
    with pytest.raises(DomainError):
        grad_select(g, [2.0])


def test_biconjugate_of_one_dimensional_max_affine(rng):
    f = MaxAffine(rng.normal(size=(8, 1)), rng.normal(size=8))
    back = conjugate(conjugate(f))
    ys = np.linspace(-3.0, 3.0, 13)[:, None]
    assert np.allclose(back.values(ys), f.values(ys), atol=1e-10)


def test_max_affine_conjugate_in_two_dimensions():
    sup_norm = MaxAffine([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], np.zeros(4))
    g = conjugate(sup_norm)
    assert isinstance(g, ConjugateOracle)
    assert evaluate(g, [0.2, 0.3]) == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(grad_select(g, [0.2, 0.3]), [0.0, 0.0], atol=1e-8)
    assert evaluate(g, [1.0, 1.0]) == np.inf
    assert conjugate(g) is sup_norm


def test_star_examples():
    s = star(abs_value(), symmetric(-1.0, 1.0))
    for y in (-3.0, -1.0, -0.5, 0.0, 0.25, 1.0, 2.5):
        assert evaluate(s, [y]) == pytest.approx(max(abs(y), 1.0))

    pl = PiecewiseLinear([-1.0, 0.0, 2.0], [1.0, 0.0, 1.0])
    same = star(pl, dirac(0.0))
    for y in (-0.5, 0.0, 1.3):
        assert evaluate(same, [y]) == pytest.approx(evaluate(pl, [y]))

    q = DiscreteMeasure([-1.0, 0.5, 3.0], [0.2, 0.5, 0.3])
    m, sigma2 = q.barycenter()[0], q.second_moment()
    quad = star(SmoothQuadLSE.quadratic(), q)
    for y in (-2.0, 0.0, 1.7):
        assert evaluate(quad, [y]) == pytest.approx(0.5 * y * y + m * y + 0.5 * sigma2)


def test_star_of_max_affine_matches_pointwise_sum(rng):
    f = MaxAffine(rng.normal(size=(6, 1)), rng.normal(size=6))
    q = DiscreteMeasure(rng.normal(size=5), rng.dirichlet(np.ones(5)))
    s = star(f, q)
    assert isinstance(s, MaxAffine)
    for y in np.linspace(-4.0, 4.0, 17):
        expected = sum(u * evaluate(f, [y + z]) for u, z in zip(q.weights, q.points_1d))
        assert evaluate(s, [y]) == pytest.approx(expected, abs=1e-10)


def test_star_with_dirac_shifts_max_affine_in_two_dimensions():
    f = MaxAffine([[1.0, 2.0], [-1.0, 0.5]], [0.0, 1.0])
    s = star(f, dirac([0.5, -1.0]))
    assert isinstance(s, MaxAffine)
    assert evaluate(s, [1.0, 1.0]) == pytest.approx(evaluate(f, [1.5, 0.0]))


def test_star_rejects_values_at_points():
    with pytest.raises(InputError):
        star(three_point(), dirac(0.0))


def test_star_oracle_gradients_match_finite_differences(rng):
    base = SmoothQuadLSE(0.5, rng.normal(size=(4, 2)), rng.normal(size=4), 0.3)
    q = DiscreteMeasure(rng.normal(size=(3, 2)), rng.dirichlet(np.ones(3)))
    s = star(base, q)
    assert isinstance(s, StarOracle)
    y = np.array([0.3, -0.2])
    h = 1e-6
    numeric = np.array([(s.value(y + h * e) - s.value(y - h * e)) / (2 * h) for e in np.eye(2)])
    assert np.allclose(s.gradient(y), numeric, atol=1e-6)
    assert np.allclose(s.gradients(y[None, :])[0], s.gradient(y))


def test_conjugate_of_star_max_affine_in_two_dimensions():
    sup_norm = MaxAffine([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], np.zeros(4))
    s = star(sup_norm, DiscreteMeasure([[-1.0, 0.0], [1.0, 0.0]]))
    g = conjugate(s)
    # min_y of the averaged distances to (1, 0) and (-1, 0) is 1
    assert evaluate(g, [0.0, 0.0]) == pytest.approx(-1.0, abs=1e-8)
    assert evaluate(g, [3.0, 0.0]) == np.inf


def test_convex_hull_examples():
    hull = convex_hull(ValuesAtPoints([[-1.0], [0.0], [1.0]], [0.0, 1.0, 0.0]))
    for x in (-1.0, -0.3, 0.0, 0.8, 1.0):
        assert evaluate(hull, [x]) == pytest.approx(0.0)

    convex = ValuesAtPoints([[-2.0], [0.0], [1.0], [3.0]], [4.0, 0.0, 1.0, 9.0])
    hull = convex_hull(convex)
    for point, value in zip(convex.points, convex.fvalues):
        assert evaluate(hull, point) == pytest.approx(value)


def test_convex_hull_matches_two_point_brute_force(rng):
    xs = np.sort(rng.uniform(-5.0, 5.0, size=20))
    ys = rng.normal(size=20) + 0.1 * xs**2
    hull = convex_hull(ValuesAtPoints(xs[:, None], ys))
    for i, x in enumerate(xs):
        best = ys[i]
        for a, b in itertools.combinations(range(20), 2):
            if xs[a] < x < xs[b]:
                lam = (xs[b] - x) / (xs[b] - xs[a])
                best = min(best, lam * ys[a] + (1.0 - lam) * ys[b])
        value = evaluate(hull, [x])
        assert value <= ys[i] + 1e-12
        assert value == pytest.approx(best, abs=1e-9)


def test_convex_hull_in_two_dimensions():
    grid = np.array(list(itertools.product([-1.0, 0.0, 1.0], repeat=2)))
    hull = convex_hull(ValuesAtPoints(grid, np.sum(grid**2, axis=1)))
    assert evaluate(hull, [0.5, 0.0]) == pytest.approx(0.5, abs=1e-9)
    assert evaluate(hull, [0.5, 0.5]) == pytest.approx(1.0, abs=1e-9)
    assert evaluate(hull, [2.0, 0.0]) == np.inf


def test_lower_hull_drops_collinear_points():
    xs, ys = lower_hull_1d([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
    assert xs.tolist() == [0.0, 2.0]
    assert ys.tolist() == [0.0, 2.0]


def test_solve_gradient_equation_one_dimension():
    f = star(SmoothQuadLSE(1e-3, [[-1.0], [0.0], [2.0]], [0.0, 0.5, -1.0], 0.05), symmetric(-0.5, 0.5))
    for x in (-1.2, 0.0, 0.4, 1.9, 5.0):
        y = solve_gradient_equation(f, np.array([x]))
        assert f.gradient(y)[0] == pytest.approx(x, abs=1e-9)


def test_solve_gradient_equation_two_dimensions(rng):
    base = SmoothQuadLSE(0.2, rng.normal(size=(5, 2)), rng.normal(size=5), 0.5)
    f = star(base, DiscreteMeasure(rng.normal(size=(4, 2))))
    for _ in range(5):
        x = rng.normal(size=2)
        y = solve_gradient_equation(f, x)
        assert np.allclose(f.gradient(y), x, atol=1e-9)


def test_in_open_hull():
    assert in_open_hull(np.array([0.0]), np.array([[-1.0], [1.0]]))
    assert not in_open_hull(np.array([1.0]), np.array([[-1.0], [1.0]]))
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    assert in_open_hull(np.array([0.5, 0.5]), square)
    assert not in_open_hull(np.array([1.0, 0.5]), square)
    assert not in_open_hull(np.array([0.5, 0.5]), np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


def test_wire_functions_are_infinite_off_their_domain():
    values = FunctionModel(type="values", points=[-1.0, 0.0, 1.0], values=[1.0, 0.0, 1.0]).to_domain()
    assert evaluate(values, [0.0]) == 0.0
    assert evaluate(values, [0.5]) == np.inf
    pl = FunctionModel(type="piecewise_linear", knots=[-1.0, 0.0, 2.0], values=[1.0, 0.0, 1.0]).to_domain()
    assert evaluate(pl, [1.0]) == pytest.approx(0.5)
    assert evaluate(pl, [-1.5]) == np.inf
    assert evaluate(pl, [2.5]) == np.inf


def test_fenchel_young_inequality_and_equality(rng):
    f = SmoothQuadLSE(0.4, rng.normal(size=(4, 1)), rng.normal(size=4), 0.3)
    g = conjugate(f)
    for _ in range(20):
        x, y = 2.0 * rng.normal(size=2)
        assert evaluate(f, [y]) + evaluate(g, [x]) >= x * y - 1e-9
    for y in np.linspace(-2.0, 2.0, 9):
        x = grad_select(f, [y])
        assert evaluate(f, [y]) + evaluate(g, x) == pytest.approx(x[0] * y, abs=1e-7)

    f2 = SmoothQuadLSE(0.5, rng.normal(size=(3, 2)), rng.normal(size=3), 0.4)
    g2 = conjugate(f2)
    for _ in range(5):
        y = rng.normal(size=2)
        x = grad_select(f2, y)
        assert evaluate(f2, y) + evaluate(g2, x) == pytest.approx(float(x @ y), abs=1e-7)
        other = rng.normal(size=2)
        assert evaluate(f2, y) + evaluate(g2, other) >= float(other @ y) - 1e-9


def test_grad_select_is_monotone_in_one_dimension(rng):
    ys = np.linspace(-3.0, 3.0, 41)
    functions = [
        SmoothQuadLSE(1e-3, rng.normal(size=(5, 1)), rng.normal(size=5), 0.1),
        MaxAffine(rng.normal(size=(6, 1)), rng.normal(size=6)),
        abs_value(),
    ]
    for f in functions:
        grads = np.array([grad_select(f, [y])[0] for y in ys])
        assert np.all(np.diff(grads) >= -1e-12)


def test_star_preserves_convexity(rng):
    q1 = DiscreteMeasure(rng.normal(size=4), rng.dirichlet(np.ones(4)))
    s1 = star(MaxAffine(rng.normal(size=(5, 1)), rng.normal(size=5)), q1)
    q2 = DiscreteMeasure(rng.normal(size=(3, 2)), rng.dirichlet(np.ones(3)))
    s2 = star(SmoothQuadLSE(0.1, rng.normal(size=(4, 2)), rng.normal(size=4), 0.2), q2)
    for s in (s1, s2):
        for _ in range(20):
            a, b = 2.0 * rng.normal(size=(2, s.dim))
            assert evaluate(s, 0.5 * (a + b)) <= 0.5 * (evaluate(s, a) + evaluate(s, b)) + 1e-9
