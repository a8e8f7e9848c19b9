import itertools

import numpy as np
import pytest

from qbass.app.errors import DimensionError, InputError
from qbass.app.services.measures import DiscreteMeasure, check_convex_order, dirac
from qbass.app.services.ot import Coupling, brenier_map, comonotone_coupling, mcov, transport, wasserstein2
from qbass.app.services.simplex import northwest_corner, solve_transportation, tree_potentials

from .conftest import split_instance, symmetric


def test_northwest_corner_is_a_spanning_staircase():
    supply = np.array([0.5, 0.3, 0.2])
    demand = np.array([0.2, 0.2, 0.6])
    flow, basis = northwest_corner(supply, demand)
    assert len(basis) == 3 + 3 - 1
    assert np.allclose(flow.sum(axis=1), supply)
    assert np.allclose(flow.sum(axis=0), demand)
    u, v = tree_potentials(np.arange(9.0).reshape(3, 3), basis)
    assert u[0] == 0.0
    for i, j in basis:
        assert u[i] + v[j] == pytest.approx(3 * i + j)


def test_transportation_matches_permutation_brute_force(rng):
    for _ in range(4):
        cost = rng.normal(size=(5, 5))
        plan = solve_transportation(cost, np.full(5, 0.2), np.full(5, 0.2))
        best = min(sum(cost[i, s[i]] for i in range(5)) / 5 for s in itertools.permutations(range(5)))
        assert plan.cost == pytest.approx(best, abs=1e-10)
        assert np.allclose(plan.flow.sum(axis=1), 0.2)
        reduced = cost - plan.u[:, None] - plan.v[None, :]
        assert reduced.min() >= -1e-9


def test_transportation_rejects_unbalanced_totals():
    with pytest.raises(InputError):
        solve_transportation(np.zeros((2, 2)), [0.5, 0.5], [0.5, 0.6])
    with pytest.raises(InputError):
        solve_transportation(np.zeros((2, 3)), [0.5, 0.5], [0.5, 0.5])


def test_mcov_examples():
    q = DiscreteMeasure([-1.0, 0.5, 3.0], [0.2, 0.5, 0.3])
    single = mcov(dirac(2.0), q)
    assert single.value == pytest.approx(2.0 * q.barycenter()[0])
    assert np.allclose(single.coupling.mass, q.weights[None, :])

    sorted_pairs = mcov(symmetric(0.0, 2.0), symmetric(-1.0, 1.0))
    assert sorted_pairs.value == pytest.approx(1.0)
    assert sorted_pairs.coupling.triples() == [(0, 0, 0.5), (1, 1, 0.5)]


def test_mcov_two_dimensions_matches_permutation_brute_force(rng):
    y = rng.normal(size=(6, 2))
    z = rng.normal(size=(6, 2))
    result = mcov(DiscreteMeasure(y), DiscreteMeasure(z))
    p, q = result.coupling.left, result.coupling.right
    gram = p.atoms @ q.atoms.T
    best = max(sum(gram[i, s[i]] for i in range(6)) / 6 for s in itertools.permutations(range(6)))
    assert result.value == pytest.approx(best, abs=1e-10)
    assert result.coupling.covariance() == pytest.approx(result.value)


def test_mcov_potentials_are_dual_feasible(rng):
    p = DiscreteMeasure(rng.normal(size=(4, 2)), rng.dirichlet(np.ones(4)))
    q = DiscreteMeasure(rng.normal(size=(5, 2)), rng.dirichlet(np.ones(5)))
    result = mcov(p, q, potentials=True)
    f, g = result.potentials
    slack = f[:, None] + g[None, :] - p.atoms @ q.atoms.T
    assert slack.min() >= -1e-9
    assert np.all(np.abs(slack[result.coupling.mass > 1e-12]) <= 1e-9)
    assert f @ p.weights + g @ q.weights == pytest.approx(result.value, abs=1e-9)


def test_mcov_one_dimension_agrees_with_network_simplex(rng):
    p = DiscreteMeasure(rng.normal(size=7), rng.dirichlet(np.ones(7)))
    q = DiscreteMeasure(rng.normal(size=4), rng.dirichlet(np.ones(4)))
    assert mcov(p, q).value == pytest.approx(mcov(p, q, potentials=True).value, abs=1e-10)


def test_mcov_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        mcov(dirac([0.0, 0.0]), dirac(1.0))


def test_coupling_validates_marginals():
    p, q = symmetric(0.0, 1.0), symmetric(0.0, 1.0)
    with pytest.raises(InputError):
        Coupling(p, q, np.array([[0.5, 0.5], [0.0, 0.0]]))
    with pytest.raises(InputError):
        Coupling(p, q, np.array([[0.6, -0.1], [-0.1, 0.6]]))


def test_comonotone_coupling_requires_one_dimension():
    with pytest.raises(DimensionError):
        comonotone_coupling(dirac([0.0, 0.0]), dirac([1.0, 1.0]))


def test_brenier_map_examples():
    q = symmetric(-1.0, 0.5, 2.0)
    same = brenier_map(q, q)
    for z in q.atoms:
        assert np.allclose(same(z), z)

    scaled = brenier_map(symmetric(-1.0, 1.0), symmetric(-3.0, 3.0))
    assert scaled([1.0])[0] == pytest.approx(3.0)
    assert scaled([-1.0])[0] == pytest.approx(-3.0)

    uneven = brenier_map(symmetric(-1.0, 0.0, 1.0), DiscreteMeasure([0.0, 1.0], [1 / 3, 2 / 3]))
    assert np.allclose(uneven.images[:, 0], [0.0, 1.0, 1.0])
    assert uneven.image().allclose(DiscreteMeasure([0.0, 1.0], [1 / 3, 2 / 3]), tol=1e-12)


def test_brenier_map_splits_mass_by_barycenter():
    # the middle atom of q is split between 0 and 3
    result = brenier_map(symmetric(-1.0, 0.0, 1.0), DiscreteMeasure([0.0, 3.0], [0.5, 0.5]))
    assert result.images[:, 0].tolist() == pytest.approx([0.0, 1.5, 3.0])
    with pytest.raises(InputError):
        result([0.25])


def test_wasserstein2_examples(rng):
    p = DiscreteMeasure(rng.normal(size=6), rng.dirichlet(np.ones(6)))
    assert wasserstein2(p, p) == pytest.approx(0.0, abs=1e-12)
    assert wasserstein2(dirac(0.0), dirac(3.0)) == pytest.approx(3.0)
    assert wasserstein2(symmetric(-1.0, 1.0), dirac(0.0)) == pytest.approx(1.0)
    assert wasserstein2(dirac([0.0, 0.0]), dirac([3.0, 4.0])) == pytest.approx(5.0)


def test_wasserstein2_one_dimension_matches_transport(rng):
    p = DiscreteMeasure(rng.normal(size=5), rng.dirichlet(np.ones(5)))
    r = DiscreteMeasure(rng.normal(size=3) + 1.0, rng.dirichlet(np.ones(3)))
    cost = (p.atoms - r.atoms.T) ** 2
    assert wasserstein2(p, r) ** 2 == pytest.approx(transport(p, r, cost).value, abs=1e-10)


def random_pair(rng, dim: int):
    p = DiscreteMeasure(rng.normal(size=(4, dim)), rng.dirichlet(np.ones(4)))
    q = DiscreteMeasure(rng.normal(size=(5, dim)), rng.dirichlet(np.ones(5)))
    return p, q


def test_mcov_is_symmetric(rng):
    for dim in (1, 1, 2, 2, 2):
        p, q = random_pair(rng, dim)
        assert mcov(p, q).value == pytest.approx(mcov(q, p).value, abs=1e-9)


def test_mcov_translation_adds_barycenter_term(rng):
    for dim in (1, 2, 2):
        p, q = random_pair(rng, dim)
        c = rng.normal(size=dim)
        expected = mcov(p, q).value + float(c @ q.barycenter())
        assert mcov(p.shift(c), q).value == pytest.approx(expected, abs=1e-9)


def test_mcov_cauchy_schwarz_bound(rng):
    for dim in (1, 2, 2, 3):
        p, q = random_pair(rng, dim)
        bound = np.sqrt(p.second_moment() * q.second_moment())
        assert abs(mcov(p, q).value) <= bound + 1e-9


def test_mcov_is_monotone_in_convex_order(rng):
    for _ in range(5):
        p, spread = split_instance(rng, n=3)
        assert check_convex_order(p, spread).ordered
        q = DiscreteMeasure(rng.normal(size=4), rng.dirichlet(np.ones(4)))
        assert mcov(p, q).value <= mcov(spread, q).value + 1e-9
