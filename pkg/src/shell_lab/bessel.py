"""Integer-order Bessel functions of the first kind and the lattice kernel.

Small arguments use the power series; everything else uses Miller's backward
recurrence normalised by ``J_0^2 + 2 * sum J_n^2 = 1`` (sign fixed by
``J_0 + 2 * sum J_2k = 1``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels

MAX_ORDER = 10_000


class BesselTruncationWarning(RuntimeWarning):
    """Requested order exceeds MAX_ORDER; the value returned is 0."""


@dataclass(frozen=True)
class BesselEvalPolicy:
    """Knobs for J_n evaluation.

    ``recurrence_headroom`` is the base number of extra orders above
    ``max(n, ceil(s))`` where the backward recurrence starts; ``ceil(s)`` more
    are always added on top.
    """

    series_cutoff_arg: float = 2.0
    max_terms: int = 200
    recurrence_headroom: int = 20
    abs_tol: float = 1e-12

    def __post_init__(self):
        if not self.series_cutoff_arg > 0:
            raise ValueError("series_cutoff_arg must be positive")
        if self.max_terms < 10:
            raise ValueError("max_terms must be at least 10")
        if self.recurrence_headroom < 15:
            raise ValueError("recurrence_headroom must be at least 15")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_POLICY = BesselEvalPolicy()


def _check_order(n):
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValueError(f"order must be a nonnegative integer, got {n!r}")
    return int(n)


def _check_args(s):
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)) or np.any(s < 0):
        raise ValueError("arguments must be finite and nonnegative")
    return s


def bessel_table(nmax: int, s, policy: BesselEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Values ``J_k(s_i)`` for ``k = 0..nmax``, shape ``(len(s), nmax + 1)``."""
    nmax = _check_order(nmax)
    s = np.atleast_1d(_check_args(s)).ravel()
    top = min(nmax, MAX_ORDER)
    table = _kernels.bessel_table(
        np.ascontiguousarray(s), top, policy.series_cutoff_arg,
        policy.recurrence_headroom, policy.max_terms)
    if top < nmax:
        warnings.warn(f"orders above {MAX_ORDER} set to 0",
                      BesselTruncationWarning, stacklevel=2)
        table = np.pad(table, ((0, 0), (0, nmax - top)))
    return table


def bessel_j(n: int, s: float, policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """J_n(s) for integer ``n >= 0`` and real ``s >= 0``."""
    n = _check_order(n)
    s = float(_check_args(s))
    if n > MAX_ORDER:
        warnings.warn(f"order {n} above {MAX_ORDER}, returning 0",
                      BesselTruncationWarning, stacklevel=2)
        return 0.0
    return float(bessel_table(n, [s], policy)[0, n])


def bessel_identity_defect(s: float, N: int, policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """``1 - (J_0(s)^2 + 2 * sum_{n=1..N} J_n(s)^2)``; nonnegative, tends to 0 in N."""
    if N < 1:
        raise ValueError("N must be at least 1")
    row = bessel_table(N, [s], policy)[0]
    return float(1.0 - (row[0] ** 2 + 2.0 * math.fsum(row[1:] ** 2)))


def kernel_table(nmax: int, r, nu: float, policy: BesselEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``H_n(r_i) = n J_n(2 r_i) exp(-nu r_i) / r_i`` for ``n = 1..nmax``.

    Shape ``(len(r), nmax)``; column ``n - 1`` holds mode ``n``. The value at
    ``r = 0`` is the continuous extension (1 for mode 1, 0 otherwise).
    """
    r = np.atleast_1d(_check_args(r)).ravel()
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    table = bessel_table(nmax, 2.0 * r, policy)[:, 1:]
    out = np.empty_like(table)
    pos = r > 0
    orders = np.arange(1, nmax + 1, dtype=float)
    out[pos] = table[pos] * orders[None, :] * (np.exp(-nu * r[pos]) / r[pos])[:, None]
    out[~pos] = 0.0
    out[~pos, 0] = 1.0
    return out


def kernel_h(n: int, r, nu: float, policy: BesselEvalPolicy = DEFAULT_POLICY):
    """Convolution kernel of mode ``n`` (``n >= 1``); scalar or array ``r``."""
    n = _check_order(n)
    if n == 0:
        raise ValueError("the kernel is defined for modes n >= 1")
    scalar = np.ndim(r) == 0
    values = kernel_table(n, r, nu, policy)[:, n - 1]
    return float(values[0]) if scalar else values


def kernel_laplace_closed_form(n: int, p: float) -> float:
    """Closed form of ``int_0^inf n J_n(2s) exp(-p s) / s ds = ((sqrt(p^2+4) - p)/2)^n``."""
    n = _check_order(n)
    if n == 0:
        raise ValueError("the kernel is defined for modes n >= 1")
    if not (np.isfinite(p) and p >= 0):
        raise ValueError("p must be finite and nonnegative")
    base = 2.0 / (p + math.sqrt(p * p + 4.0))
    return base ** n
