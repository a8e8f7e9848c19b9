import numpy as np
import pytest

from qbass.app.config import get_settings
from qbass.app.errors import ConvexOrderError, DimensionError, InputError
from qbass.app.services.measures import (
    DiscreteMeasure,
    barycenter,
    check_convex_order,
    check_irreducible,
    convolve,
    dirac,
    empirical,
    pushforward,
    require_convex_order,
    second_moment,
)

from .conftest import split_instance, symmetric


def test_measure_sorts_and_merges_atoms():
    p = DiscreteMeasure([2.0, -1.0, 2.0], [0.25, 0.5, 0.25])
    assert p.size == 2
    assert p.points_1d.tolist() == [-1.0, 2.0]
    assert np.allclose(p.weights, [0.5, 0.5])


def test_measure_sorts_lexicographically_in_2d():
    p = DiscreteMeasure([[1.0, 0.0], [0.0, 5.0], [0.0, -1.0]])
    assert p.atoms.tolist() == [[0.0, -1.0], [0.0, 5.0], [1.0, 0.0]]


def test_measure_rejects_bad_mass():
    with pytest.raises(InputError):
        DiscreteMeasure([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(InputError):
        DiscreteMeasure([0.0, 1.0], [1.5, -0.5])
    with pytest.raises(InputError):
        DiscreteMeasure([0.0, np.inf])
    with pytest.raises(InputError):
        DiscreteMeasure([0.0, 1.0], [1.0])


def test_measure_is_immutable():
    p = symmetric(-1.0, 1.0)
    with pytest.raises(ValueError):
        p.atoms[0, 0] = 3.0


def test_barycenter_examples():
    assert barycenter(dirac(3.0)).tolist() == [3.0]
    assert barycenter(symmetric(-1.0, 1.0)).tolist() == [0.0]
    assert barycenter(DiscreteMeasure([0.0, 10.0], [0.3, 0.7]))[0] == pytest.approx(7.0)


def test_second_moment_examples():
    assert second_moment(dirac(0.0)) == 0.0
    assert second_moment(symmetric(-1.0, 1.0)) == pytest.approx(1.0)
    assert second_moment(DiscreteMeasure([0.0, 10.0], [0.3, 0.7])) == pytest.approx(70.0)


def test_convolve_examples():
    q = DiscreteMeasure([-3.0, 0.5, 2.0], [0.2, 0.5, 0.3])
    assert convolve(dirac(0.0), q).allclose(q)
    assert convolve(dirac(1.5), q).allclose(q.shift([1.5]))

    binomial = convolve(symmetric(-1.0, 1.0), symmetric(-1.0, 1.0))
    assert binomial.points_1d.tolist() == [-2.0, 0.0, 2.0]
    assert np.allclose(binomial.weights, [0.25, 0.5, 0.25])


def test_convolve_rejects_dimension_mismatch():
    with pytest.raises(DimensionError):
        convolve(dirac([0.0, 0.0]), dirac(1.0))


def test_pushforward_examples():
    p = symmetric(-1.0, 1.0)
    assert pushforward(p, lambda y: y).allclose(p)
    assert pushforward(p, lambda y: np.array([4.0])).allclose(dirac(4.0))
    doubled = pushforward(p, lambda y: 2.0 * y)
    assert doubled.points_1d.tolist() == [-2.0, 2.0]


def test_pushforward_reports_undefined_map():
    with pytest.raises(InputError):
        pushforward(symmetric(-1.0, 1.0), lambda y: np.array([np.inf]))


def test_empirical_averages_samples(rng):
    samples = rng.normal(size=(40, 2))
    p = empirical(samples)
    assert p.dim == 2
    assert np.allclose(p.barycenter(), samples.mean(axis=0))


def test_locate_finds_atoms_and_rejects_strangers():
    p = symmetric(-1.0, 0.0, 1.0)
    assert p.locate([[1.0], [-1.0]]).tolist() == [2, 0]
    with pytest.raises(InputError):
        p.locate([[0.5]])


def test_convex_order_examples():
    p = DiscreteMeasure([-1.0, 0.5, 2.0], [0.2, 0.5, 0.3])
    same = check_convex_order(p, p)
    assert same.ordered
    assert np.allclose(same.witness.rows, np.eye(3), atol=1e-8)

    split = check_convex_order(dirac(0.0), symmetric(-1.0, 1.0))
    assert split.ordered
    assert np.allclose(split.witness.rows, [[0.5, 0.5]], atol=1e-9)

    assert not check_convex_order(symmetric(-1.0, 1.0), dirac(0.0)).ordered
    with pytest.raises(ConvexOrderError, match="not in convex order"):
        require_convex_order(symmetric(-1.0, 1.0), dirac(0.0))


def test_convex_order_witness_is_martingale(rng):
    for _ in range(5):
        mu, nu = split_instance(rng, n=4)
        result = check_convex_order(mu, nu)
        assert result.ordered
        residuals = result.witness.residuals()
        assert residuals.row_sum < 1e-8
        assert residuals.barycenter < 1e-7
        assert residuals.marginal < 1e-7


def test_convex_order_rejects_barycenter_mismatch():
    assert not check_convex_order(dirac(0.0), symmetric(0.0, 2.0)).ordered


def test_irreducible_examples():
    split = check_irreducible(dirac(0.0), symmetric(-1.0, 1.0))
    assert split.irreducible
    assert split.blocking_pair is None

    pair = symmetric(-1.0, 1.0)
    identity = check_irreducible(pair, pair)
    assert not identity.irreducible
    assert identity.lp_solves >= 1
    x, y = identity.blocking_pair
    assert abs(x[0] - y[0]) == pytest.approx(2.0)


def test_irreducible_detects_forced_kernel():
    # From -2 the only martingale move is onto {-3, -1}, and from +2 onto {+1, +3}.
    result = check_irreducible(symmetric(-2.0, 2.0), symmetric(-3.0, -1.0, 1.0, 3.0))
    assert not result.irreducible


def test_irreducible_with_worker_pool(monkeypatch):
    monkeypatch.setenv("QBASS_WORKERS", "2")
    get_settings.cache_clear()
    assert check_irreducible(dirac(0.0), symmetric(-1.0, 0.5, 1.0)).irreducible
    assert not check_irreducible(symmetric(-1.0, 1.0), symmetric(-1.0, 1.0)).irreducible
