"""Greatest clearing wealths for deterministic endowments.

The clearing map scales a defaulting bank's external assets by ``alpha_x``
and its interbank inflows by ``alpha_L``.  For a fixed default indicator
``z`` the wealths are affine in the endowments, ``V = Delta(z) x - delta(z)``,
which the fictitious default algorithm exploits: guess the default set,
solve the linear system, repeat until the set stabilizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import FinancialNetwork

# Wealths within this band of zero are classified as solvent, preventing
# round-off oscillation of the default indicator.
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ClearingResult:
    """Clearing outcome for one endowment vector.

    ``V`` are wealths, ``p = p_bar - max(-V, 0)`` the payments,
    ``E = max(V, 0)`` the equities, ``z`` the default indicator
    (1 where ``V < 0``), ``iterations`` the number of default-set
    guesses evaluated, and ``societal_payment`` the total flow to
    the societal node.
    """

    V: np.ndarray
    p: np.ndarray
    E: np.ndarray
    z: np.ndarray
    iterations: int
    societal_payment: float


def psi_star(net: FinancialNetwork, x, V) -> np.ndarray:
    """One application of the clearing map to a wealth vector.

    Solvent banks (``V_i >= 0``) keep full assets; defaulting banks keep
    ``alpha_x`` of external and ``alpha_L`` of interbank assets.  Payments
    feeding the inflow term are ``p_bar - max(-V, 0)``.
    """
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    pay = net.p_bar - np.maximum(-V, 0.0)
    default = V < 0.0
    ax = np.where(default, net.alpha_x, 1.0)
    aL = np.where(default, net.alpha_L, 1.0)
    return ax * x + aL * (net.Pi.T @ pay) - net.p_bar


def _system_matrix(net: FinancialNetwork, z: np.ndarray) -> np.ndarray:
    # M = I - (I - (1-aL) diag(z)) [Pi^T diag(z) + Gamma^T (I - diag(z))]
    zf = z.astype(float)
    b = 1.0 - (1.0 - net.alpha_L) * zf
    inner = net.Pi.T * zf[None, :] + net.Gamma.T * (1.0 - zf)[None, :]
    return np.eye(net.n) - b[:, None] * inner


def delta_matrix(net: FinancialNetwork, z) -> np.ndarray:
    """Sensitivity of clearing wealths to endowments for default set ``z``."""
    z = np.asarray(z)
    M = _system_matrix(net, z)
    rhs = np.eye(net.n) * (1.0 - (1.0 - net.alpha_x) * z.astype(float))
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise RuntimeError(
            "internal invariant violation: clearing system is singular"
        ) from exc


def delta_vector(net: FinancialNetwork, z) -> np.ndarray:
    """Intercept of the affine wealth map for default set ``z``."""
    z = np.asarray(z)
    M = _system_matrix(net, z)
    b = 1.0 - (1.0 - net.alpha_L) * z.astype(float)
    rhs = net.p_bar - b * (net.Pi.T @ net.p_bar)
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise RuntimeError(
            "internal invariant violation: clearing system is singular"
        ) from exc


def _result_from_wealths(net, V, iterations) -> ClearingResult:
    p = np.clip(net.p_bar - np.maximum(-V, 0.0), 0.0, net.p_bar)
    E = np.maximum(V, 0.0)
    z = (V < -ZERO_TOL).astype(int)
    return ClearingResult(
        V=V,
        p=p,
        E=E,
        z=z,
        iterations=iterations,
        societal_payment=float(net.pi_soc @ p),
    )


def greatest_clearing(net: FinancialNetwork, x) -> ClearingResult:
    """Greatest clearing wealths via the fictitious default algorithm.

    Starts from the no-default wealths, marks every bank with negative
    wealth as defaulting, re-solves the affine system, and stops once the
    default set is stable.  The set only grows, so at most ``n + 1``
    default-set guesses are evaluated.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (net.n,):
        raise ValueError(f"endowments must have shape ({net.n},), got {x.shape}")
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("endowments must be nonnegative and finite")

    z = np.zeros(net.n, dtype=bool)
    V = delta_matrix(net, z) @ x - delta_vector(net, z)
    iterations = 1
    for _ in range(net.n + 1):
        z_new = z | (V < -ZERO_TOL)
        if np.array_equal(z_new, z):
            break
        z = z_new
        V = delta_matrix(net, z) @ x - delta_vector(net, z)
        iterations += 1
    return _result_from_wealths(net, V, iterations)


def greatest_clearing_batch(net: FinancialNetwork, X):
    """Vectorized greatest clearing over many endowment rows.

    Parameters
    ----------
    X : ndarray, shape (m, n)
        One endowment vector per row.

    Returns
    -------
    (V, p, E, Z) : ndarrays of shape (m, n)
        ``Z`` is the integer default indicator per row.

    Rows are grouped by their current default pattern each round so the
    linear system is factored once per distinct pattern, not once per row.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.n:
        raise ValueError(f"endowment batch must have shape (m, {net.n})")
    m = X.shape[0]

    cache = {}

    def affine(zkey):
        if zkey not in cache:
            z = np.frombuffer(zkey, dtype=bool).copy()
            cache[zkey] = (delta_matrix(net, z), delta_vector(net, z))
        return cache[zkey]

    Z = np.zeros((m, net.n), dtype=bool)
    D0, d0 = affine(Z[0].tobytes())
    V = X @ D0.T - d0

    for _ in range(net.n + 1):
        Z_new = Z | (V < -ZERO_TOL)
        changed = np.any(Z_new != Z, axis=1)
        if not changed.any():
            break
        Z = Z_new
        idx = np.flatnonzero(changed)
        patterns, inverse = np.unique(Z[idx], axis=0, return_inverse=True)
        for k in range(patterns.shape[0]):
            rows = idx[inverse == k]
            D, d = affine(patterns[k].tobytes())
            V[rows] = X[rows] @ D.T - d

    p = np.clip(net.p_bar[None, :] - np.maximum(-V, 0.0), 0.0, net.p_bar[None, :])
    E = np.maximum(V, 0.0)
    return V, p, E, Z.astype(int)
