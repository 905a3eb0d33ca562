"""Shared numerical helpers for the test suite."""

import numpy as np
import pytest


def finite_diff_grad(f, w, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    g = np.zeros_like(w, dtype=float)
    for i in range(w.size):
        wp = w.copy()
        wm = w.copy()
        wp[i] += h
        wm[i] -= h
        g[i] = (f(wp) - f(wm)) / (2.0 * h)
    return g


def max_rel_err(analytic, numeric):
    """Componentwise |a - n| / max(1, |n|), maximized."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def random_column_stochastic(rng, n_y, n_z):
    """Random valid transition matrix with Dirichlet columns."""
    from indirectml.transition import TransitionMatrix

    cols = rng.dirichlet(np.ones(n_y), size=n_z).T
    return TransitionMatrix(cols)


def random_interior_probs(rng, k):
    """Random simplex point kept safely away from the boundary."""
    from indirectml.transition import SimplexVector

    raw = rng.dirichlet(np.ones(k))
    return SimplexVector(0.9 * raw + 0.1 / k, tol=1e-9)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
