"""Financial network data model: liabilities, relative weights, recovery rates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Raised when a liabilities structure violates the model assumptions."""


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FinancialNetwork:
    """Static interbank network of n banks plus an implicit societal sink node.

    Attributes
    ----------
    n : int
        Number of banks.  The societal node is column ``n`` of ``L`` and is
        not represented as a row (it has no liabilities).
    L : ndarray, shape (n, n+1)
        Nominal liabilities in currency units; ``L[i, j]`` is what bank ``i``
        owes bank ``j``, and column ``n`` holds obligations to society.
    p_bar : ndarray, shape (n,)
        Total liabilities, the row sums of ``L``.
    Pi : ndarray, shape (n, n)
        Relative interbank liabilities ``L[i, j] / p_bar[i]``.
    pi_soc : ndarray, shape (n,)
        Relative liability to the societal node, ``1 - Pi.sum(axis=1)``.
    alpha_x : float
        Recovery rate on external assets of a defaulting bank, in [0, 1].
    alpha_L : float
        Recovery rate on interbank assets of a defaulting bank, in [0, 1].
    Gamma : ndarray, shape (n, n)
        Cross-ownership fractions (bank j owns ``Gamma[i, j]`` of bank i's
        equity).  All zeros when cross-ownership is absent.

    Instances are immutable; the arrays are read-only views.
    """

    n: int
    L: np.ndarray
    p_bar: np.ndarray
    Pi: np.ndarray
    pi_soc: np.ndarray
    alpha_x: float
    alpha_L: float
    Gamma: np.ndarray = field(repr=False, default=None)

    @property
    def full_recovery(self) -> bool:
        return self.alpha_x == 1.0 and self.alpha_L == 1.0

    @property
    def has_cross_ownership(self) -> bool:
        return bool(np.any(self.Gamma != 0.0))

    def interbank_assets(self) -> np.ndarray:
        """Nominal interbank assets per bank, ``sum_j L[j, i]``."""
        return self.L[:, : self.n].sum(axis=0)


def build_network(L, alpha_x: float, alpha_L: float, Gamma=None) -> FinancialNetwork:
    """Validate a liabilities matrix and derive the relative-liability fields.

    Parameters
    ----------
    L : array_like, shape (n, n+1)
        Nonnegative nominal liabilities; the last column is owed to society.
    alpha_x, alpha_L : float
        Recovery rates in [0, 1] applied to a defaulting bank's external and
        interbank assets respectively.
    Gamma : array_like, shape (n, n), optional
        Cross-ownership matrix with row sums strictly below 1.

    Raises
    ------
    NetworkError
        On any structural violation; the message names the offending bank.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] != L.shape[0] + 1:
        raise NetworkError(
            f"liabilities matrix must have shape (n, n+1), got {L.shape}"
        )
    n = L.shape[0]
    if not np.all(np.isfinite(L)):
        i = int(np.argwhere(~np.isfinite(L).all(axis=1)).ravel()[0])
        raise NetworkError(f"bank {i}: non-finite liability entry")
    if np.any(L < 0.0):
        i, j = map(int, np.argwhere(L < 0.0)[0])
        raise NetworkError(f"bank {i}: negative liability to node {j}")
    diag = np.diagonal(L[:, :n])
    if np.any(diag != 0.0):
        i = int(np.argwhere(diag != 0.0).ravel()[0])
        raise NetworkError(f"bank {i}: self-obligation L[{i},{i}] must be zero")

    p_bar = L.sum(axis=1)
    if np.any(p_bar <= 0.0):
        i = int(np.argwhere(p_bar <= 0.0).ravel()[0])
        raise NetworkError(f"bank {i}: total liabilities must be positive")
    if np.any(L[:, n] <= 0.0):
        i = int(np.argwhere(L[:, n] <= 0.0).ravel()[0])
        raise NetworkError(f"bank {i}: missing obligation to the societal node")

    for name, a in (("alpha_x", alpha_x), ("alpha_L", alpha_L)):
        if not (np.isfinite(a) and 0.0 <= a <= 1.0):
            raise NetworkError(f"{name} must lie in [0, 1], got {a}")

    if Gamma is None:
        Gamma = np.zeros((n, n))
    else:
        Gamma = np.asarray(Gamma, dtype=float)
        if Gamma.shape != (n, n):
            raise NetworkError(
                f"cross-ownership matrix must have shape {(n, n)}, got {Gamma.shape}"
            )
        if not np.all(np.isfinite(Gamma)) or np.any(Gamma < 0.0):
            raise NetworkError("cross-ownership entries must be finite and nonnegative")
        rows = Gamma.sum(axis=1)
        if np.any(rows >= 1.0):
            i = int(np.argwhere(rows >= 1.0).ravel()[0])
            raise NetworkError(f"bank {i}: cross-ownership row sum must be below 1")

    Pi = L[:, :n] / p_bar[:, None]
    pi_soc = L[:, n] / p_bar
    return FinancialNetwork(
        n=n,
        L=_readonly(L),
        p_bar=_readonly(p_bar),
        Pi=_readonly(Pi),
        pi_soc=_readonly(pi_soc),
        alpha_x=float(alpha_x),
        alpha_L=float(alpha_L),
        Gamma=_readonly(Gamma),
    )


def network_from_relative(
    Pi, p_bar, alpha_x: float, alpha_L: float, Gamma=None
) -> FinancialNetwork:
    """Rebuild a network from relative liabilities and totals.

    The societal share of each row is ``1 - Pi.sum(axis=1)``; round-tripping
    ``build_network`` output reproduces ``L`` up to floating-point error.
    """
    Pi = np.asarray(Pi, dtype=float)
    p_bar = np.asarray(p_bar, dtype=float)
    if Pi.ndim != 2 or Pi.shape[0] != Pi.shape[1] or Pi.shape[0] != p_bar.shape[0]:
        raise NetworkError("relative liabilities must be square and match p_bar")
    soc = 1.0 - Pi.sum(axis=1)
    L = np.empty((Pi.shape[0], Pi.shape[0] + 1))
    L[:, : Pi.shape[0]] = Pi * p_bar[:, None]
    L[:, Pi.shape[0]] = soc * p_bar
    return build_network(L, alpha_x, alpha_L, Gamma)
