from __future__ import annotations

import numpy as np
import pytest

from qbass.app.config import get_settings
from qbass.app.services.measures import DiscreteMeasure


def symmetric(*points: float) -> DiscreteMeasure:
    """Equal-weight measure on R."""

    return DiscreteMeasure(np.asarray(points, dtype=float))


def split_instance(rng: np.random.Generator, n: int = 3) -> tuple:
    """Random 1D pair mu ≼c nu: every atom of mu is split into two atoms around it."""

    base = np.sort(rng.uniform(-2.0, 2.0, size=n))
    mu_weights = rng.dirichlet(np.ones(n))
    left = rng.uniform(0.2, 1.0, size=n)
    right = rng.uniform(0.2, 1.0, size=n)
    atoms = np.concatenate([base - left, base + right])
    weights = np.concatenate([mu_weights * right / (left + right), mu_weights * left / (left + right)])
    return DiscreteMeasure(base, mu_weights), DiscreteMeasure(atoms, weights)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch):
    monkeypatch.delenv("QBASS_WORKERS", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
