import numpy as np
import pytest

from qbass.app.errors import InputError
from qbass.app.services.quantize import quantize_gaussian, quantize_laplace


def test_two_point_gaussian():
    p = quantize_gaussian(2)
    assert p.points_1d.tolist() == pytest.approx([-0.6744897501960817, 0.6744897501960817], abs=1e-12)
    assert p.weights.tolist() == [0.5, 0.5]


@pytest.mark.parametrize("m", [2, 7, 50, 101])
def test_gaussian_is_centred(m):
    p = quantize_gaussian(m, sigma=2.0)
    assert p.size == m
    assert p.barycenter()[0] == pytest.approx(0.0, abs=1e-12)


def test_gaussian_second_moment_approaches_variance():
    # quantile quantization loses tail mass, so the second moment sits slightly below sigma^2
    assert quantize_gaussian(200).second_moment() == pytest.approx(1.0, abs=1e-2)
    assert quantize_gaussian(200).second_moment() < 1.0
    assert quantize_gaussian(400, sigma=0.5).second_moment() == pytest.approx(0.25, abs=5e-3)


def test_laplace_barycenter_follows_scales():
    p = quantize_laplace(400, left_scale=1.0, right_scale=2.0)
    assert p.size == 400
    assert p.barycenter()[0] == pytest.approx(1.0, abs=1e-2)
    assert np.sum(p.points_1d < 0) == pytest.approx(400 / 3, abs=1)


def test_quantize_rejects_bad_arguments():
    with pytest.raises(InputError):
        quantize_gaussian(1)
    with pytest.raises(InputError):
        quantize_gaussian(3.5)
    with pytest.raises(InputError):
        quantize_gaussian(10, sigma=0.0)
    with pytest.raises(InputError):
        quantize_laplace(10, left_scale=-1.0)
