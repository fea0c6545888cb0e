"""Deterministic lattice dynamics: generator, Bessel-series flow, expm oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bessel import DEFAULT_POLICY, BesselEvalPolicy, bessel_table


@dataclass(frozen=True)
class LatticeParams:
    """Viscosity and truncation of the lattice.

    ``series_order_cap`` bounds the Bessel orders kept in the series flow and
    defaults to ``2 * truncation``.
    """

    nu: float
    truncation: int = 400
    series_order_cap: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError("nu must be positive and finite")
        if int(self.truncation) != self.truncation or self.truncation < 2:
            raise ValueError("truncation must be an integer >= 2")
        if self.series_order_cap is None:
            object.__setattr__(self, "series_order_cap", 2 * self.truncation)
        if self.series_order_cap < 2 * self.truncation:
            raise ValueError("series_order_cap must be at least 2 * truncation")


def shell_vector(entries, dim: int | None = None) -> np.ndarray:
    """Validate and copy a shell state (last axis indexes modes 1..N)."""
    x = np.array(entries, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError("a shell vector needs at least one mode")
    if not np.all(np.isfinite(x)):
        raise ValueError("shell vector entries must be finite")
    if dim is not None and x.shape[-1] != dim:
        raise ValueError(f"expected {dim} modes, got {x.shape[-1]}")
    return x


def unit_vector(n: int, dim: int) -> np.ndarray:
    """The canonical basis vector e_n (1-based mode index)."""
    if not 1 <= n <= dim:
        raise ValueError("mode index out of range")
    e = np.zeros(dim)
    e[n - 1] = 1.0
    return e


def apply_generator(x, params: LatticeParams) -> np.ndarray:
    """``(R - nu I) x`` on the truncated lattice (zero beyond mode N)."""
    x = shell_vector(x, params.truncation)
    y = -params.nu * x
    y[..., 0] -= x[..., 1]
    y[..., 1:-1] += x[..., :-2] - x[..., 2:]
    y[..., -1] += x[..., -2]
    return y


def generator_matrix(params: LatticeParams) -> np.ndarray:
    """Dense ``R - nu I``: -1 above the diagonal, +1 below, -nu on it."""
    N = params.truncation
    return (np.diag(np.full(N - 1, -1.0), 1) + np.diag(np.ones(N - 1), -1)
            - params.nu * np.eye(N))


def flow_matrix(t: float, params: LatticeParams,
                policy: BesselEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Matrix ``T`` with ``d(t; x) = T x`` from the Bessel series.

    ``T[n, m] = exp(-nu t) (J_{n-m}(2t) + (-1)^(m-1) J_{n+m}(2t))`` with the
    signed order ``J_{-k} = (-1)^k J_k``; the image term enforces ``A_0 = 0``.
    """
    if not (np.isfinite(t) and t >= 0):
        raise ValueError("t must be finite and nonnegative")
    N = params.truncation
    cap = params.series_order_cap
    J = np.zeros(2 * N + 2)
    J[:cap + 1] = bessel_table(min(cap, 2 * N + 1), [2.0 * t], policy)[0, :min(cap, 2 * N + 1) + 1]
    n = np.arange(1, N + 1)[:, None]
    m = np.arange(1, N + 1)[None, :]
    image = np.where(m % 2 == 1, 1.0, -1.0)
    # signed order: J_{n-m} = (-1)^(m-n) J_{m-n} above the diagonal
    direct = np.where((m > n) & ((m - n) % 2 == 1), -1.0, 1.0)
    return np.exp(-params.nu * t) * (direct * J[np.abs(n - m)] + image * J[n + m])


def deterministic_solution(x, t: float, params: LatticeParams,
                           policy: BesselEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Noise-free solution ``d(t; x)`` via the Bessel series.

    ``x`` may be a single state or a stack of states along the leading axes.
    """
    x = shell_vector(x, params.truncation)
    if t == 0:
        return x.copy()
    return x @ flow_matrix(t, params, policy).T


def deterministic_solution_expm(x, t: float, params: LatticeParams) -> np.ndarray:
    """Independent oracle: ``expm((R - nu I) t) x`` on the truncated lattice."""
    x = shell_vector(x, params.truncation)
    if not (np.isfinite(t) and t >= 0):
        raise ValueError("t must be finite and nonnegative")
    if t == 0:
        return x.copy()
    return x @ scipy.linalg.expm(generator_matrix(params) * t).T


def lyapunov_defect(x, t: float, params: LatticeParams,
                    policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """``| ||d(t;x)|| - exp(-nu t) ||x|| | / ||x||``; zero up to truncation."""
    x = shell_vector(x, params.truncation)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("lyapunov_defect needs a nonzero state")
    d = deterministic_solution(x, t, params, policy)
    return float(abs(np.linalg.norm(d) - np.exp(-params.nu * t) * norm) / norm)
