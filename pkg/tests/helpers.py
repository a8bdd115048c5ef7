"""Shared generators for property tests."""

import numpy as np

from netval import build_network


def make_cycle(alpha_x, alpha_L=None):
    if alpha_L is None:
        alpha_L = alpha_x
    return build_network([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0]], alpha_x, alpha_L)


def make_two_bank(alpha_x=1.0, alpha_L=None):
    if alpha_L is None:
        alpha_L = alpha_x
    return build_network([[0.0, 7.0, 3.0], [3.0, 0.0, 3.0]], alpha_x, alpha_L)


def random_net(rng, n=None, alpha=1.0):
    """Random valid network: sparse interbank block, positive societal column."""
    if n is None:
        n = int(rng.integers(2, 6))
    inter = rng.uniform(0.0, 2.0, (n, n))
    inter[rng.random((n, n)) < 0.35] = 0.0
    np.fill_diagonal(inter, 0.0)
    L = np.column_stack([inter, rng.uniform(0.5, 2.0, n)])
    return build_network(L, alpha, alpha)


def random_corr(rng, n):
    """Random positive definite correlation matrix."""
    A = rng.normal(size=(n, n))
    C = A @ A.T + 0.1 * n * np.eye(n)
    d = 1.0 / np.sqrt(np.diag(C))
    return d[:, None] * C * d[None, :]


def appb_p02(ax, aL):
    """Payments at x = (0, 2) on the cycle network."""
    den = 6.0 - aL**2
    return np.array([4.0 * ax * aL, 12.0 * ax]) / den


def appb_p10(ax, aL):
    """Payments at x = (1, 0) on the cycle network."""
    den = 6.0 - aL**2
    return np.array([6.0 * ax, 3.0 * ax * aL]) / den
