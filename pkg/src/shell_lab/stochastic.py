"""Laws of the stochastic convolution and the path-simulation oracle.

Gaussian covariances and stable scales are integrals of the kernel ``H_n``
over ``[0, t]``; infinite horizons are cut at ``max(50, (40 + 2n)/nu)`` where
``exp(-2 nu r)`` has made the integrand negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammaln

from .bessel import DEFAULT_POLICY, BesselEvalPolicy, kernel_laplace_closed_form, kernel_table
from .drivers import AlphaStable, GaussOU, second_moment_rate
from .lattice import LatticeParams, deterministic_solution
from .quadrature import KRONROD_WEIGHTS, NODES, integrate
from .simulation import (Ensemble, SimulationError, StateSample, burn_in_horizon,
                         simulate_ensemble, simulate_state_path, stationary_ensemble)

__all__ = [
    "CovarianceMatrix", "StableScales", "StateSample", "Ensemble", "SimulationError",
    "horizon", "covariance_entry", "covariance_matrix", "stable_scale", "stable_scales",
    "stable_abs_moment", "stable_moment_theta", "ou_filtered_kernel", "ou_limit_variance",
    "stable_ou_limit_scale", "sample_gaussian_state", "sample_gaussian_cloud",
    "simulate_state_path", "simulate_ensemble", "stationary_ensemble", "mean_limit_norm",
    "summability_report", "second_moment_limit",
]

PSD_FLOOR = 1e-10
SAMPLE_FLOOR = 1e-8


class PSDError(ArithmeticError):
    """A covariance matrix has an eigenvalue below the tolerance floor."""


def horizon(n: int, nu: float) -> float:
    """Truncation point for infinite-horizon kernel integrals of mode ``n``."""
    return max(50.0, (40.0 + 2.0 * n) / nu)


def _check_t(t):
    t = float(t)
    if math.isnan(t) or t < 0:
        raise ValueError("t must be nonnegative (math.inf for the limit)")
    return t


def _upper(t, n, nu):
    return horizon(n, nu) if math.isinf(t) else t


def _panels(length):
    return max(1, math.ceil(length / 2.0))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric PSD matrix holding ``Sigma_t`` or ``Sigma_inf``."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("covariance entries must be finite")
        if not np.array_equal(a, a.T):
            raise ValueError("covariance must be exactly symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        w = np.linalg.eigvalsh(a) if a.size else np.zeros(0)
        scale = max(1.0, float(np.trace(a)))
        if w.size and w.min() < -PSD_FLOOR * scale:
            raise PSDError(f"eigenvalue {w.min():.3e} below floor {-PSD_FLOOR * scale:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def sqrt(self) -> np.ndarray:
        """Symmetric square root with negative eigenvalues clamped to 0."""
        w, v = np.linalg.eigh(self.entries)
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T

    def leading(self, k: int) -> "CovarianceMatrix":
        return CovarianceMatrix(self.entries[:k, :k])

    def scaled(self, factor: float) -> "CovarianceMatrix":
        return CovarianceMatrix(self.entries * factor)

    def triples(self):
        """``(row, col, value)`` with 1-based modes, row-major."""
        n = self.dim
        return [(i + 1, j + 1, float(self.entries[i, j])) for i in range(n) for j in range(n)]

    @classmethod
    def from_triples(cls, rows) -> "CovarianceMatrix":
        rows = list(rows)
        n = max(max(int(r), int(c)) for r, c, _ in rows)
        a = np.zeros((n, n))
        for r, c, v in rows:
            a[int(r) - 1, int(c) - 1] = float(v)
        return cls(a)


@dataclass(frozen=True)
class StableScales:
    """Per-mode stable scales ``s_n`` of the limit law (``E exp(iuG_n) = exp(-|s_n u|^alpha)``)."""

    alpha: float
    sigma: float
    nu: float
    scales: np.ndarray

    def __post_init__(self):
        s = np.array(self.scales, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("scales must be a nonempty vector of nonnegative reals")
        s.setflags(write=False)
        object.__setattr__(self, "scales", s)

    def pairs(self):
        return [(n + 1, float(v)) for n, v in enumerate(self.scales)]


def covariance_entry(i: int, j: int, t: float, sigma: float, nu: float,
                     policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """``sigma^2 * int_0^t H_i H_j dr``; pass ``math.inf`` for the limit."""
    if i < 1 or j < 1:
        raise ValueError("modes are numbered from 1")
    t = _check_t(t)
    if t == 0 or sigma == 0:
        return 0.0
    top = max(i, j)
    b = _upper(t, top, nu)
    res = integrate(lambda r: (lambda h: h[:, i - 1] * h[:, j - 1])(kernel_table(top, r, nu, policy)),
                    0.0, b, panels=_panels(b), epsabs=1e-300, epsrel=1e-10)
    return sigma ** 2 * res.value


def covariance_matrix(N: int, t: float, sigma: float, nu: float,
                      policy: BesselEvalPolicy = DEFAULT_POLICY) -> CovarianceMatrix:
    """All entries of ``Sigma_t`` for modes ``1..N`` in one vector quadrature."""
    if N < 1:
        raise ValueError("N must be at least 1")
    t = _check_t(t)
    if t == 0 or sigma == 0:
        return CovarianceMatrix(np.zeros((N, N)))
    iu, ju = np.triu_indices(N)
    b = _upper(t, N, nu)

    def f(r):
        h = kernel_table(N, r, nu, policy)
        return h[:, iu] * h[:, ju]

    # absolute floor relative to the (1,1) entry, which dominates the trace
    res = integrate(f, 0.0, b, panels=_panels(b), epsabs=1e-15 * 0.5 / nu, epsrel=1e-10)
    out = np.zeros((N, N))
    out[iu, ju] = res.value
    out[ju, iu] = res.value
    return CovarianceMatrix(sigma ** 2 * out)


def _sign_changes(f, a, b, step=0.25, iters=40):
    """Zeros of a scalar function on ``[a, b]`` located by grid scan and bisection."""
    x = np.linspace(a, b, max(2, math.ceil((b - a) / step) + 1))
    y = f(x)
    idx = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    lo, hi = x[idx], x[idx + 1]
    ylo = y[idx]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ym = f(mid)
        left = np.sign(ym) == np.sign(ylo)
        lo = np.where(left, mid, lo)
        ylo = np.where(left, ym, ylo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _abs_power_integral(f, b, alpha, scale):
    """``int_0^b |f|^alpha`` with breakpoints at the sign changes of ``f``."""
    zeros = _sign_changes(f, 0.0, b)
    res = integrate(lambda r: np.abs(f(r)) ** alpha, 0.0, b, breakpoints=zeros,
                    epsabs=1e-15 * scale, epsrel=1e-10)
    return res.value


def stable_scale(n: int, t: float, alpha: float, sigma: float, nu: float,
                 policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """``sigma * (int_0^t |H_n|^alpha dr)^(1/alpha)``.

    ``alpha = 2`` is accepted so the Gaussian end of the family can be checked.
    """
    if n < 1:
        raise ValueError("modes are numbered from 1")
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    t = _check_t(t)
    if t == 0 or sigma == 0:
        return 0.0
    b = _upper(t, n, nu)
    val = _abs_power_integral(lambda r: kernel_table(n, r, nu, policy)[:, n - 1], b, alpha, 1.0 / nu)
    return sigma * val ** (1.0 / alpha)


def stable_scales(N: int, alpha: float, sigma: float, nu: float,
                  policy: BesselEvalPolicy = DEFAULT_POLICY) -> StableScales:
    return StableScales(alpha, sigma, nu,
                        [stable_scale(n, math.inf, alpha, sigma, nu, policy) for n in range(1, N + 1)])


def stable_abs_moment(theta: float, alpha: float, scale: float) -> float:
    """``E|X|^theta`` for symmetric stable ``X`` with ``E exp(iuX) = exp(-|scale u|^alpha)``."""
    if not 0 < theta < alpha:
        raise ValueError("need 0 < theta < alpha (the moment diverges at theta = alpha)")
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    if scale == 0:
        return 0.0
    log_gamma = gammaln((1 + theta) / 2) - 0.5 * math.log(math.pi)
    # both arguments lie in (0, 1); the ratio is 1 at alpha = 2
    ratio = gamma_fn(1 - theta / alpha) / gamma_fn(1 - theta / 2)
    return float((2.0 * scale) ** theta * math.exp(log_gamma) * ratio)


def stable_moment_theta(n: int, theta: float, alpha: float, sigma: float, nu: float,
                        policy: BesselEvalPolicy = DEFAULT_POLICY) -> float:
    """``E|G_n|^theta`` for the stable limit law of mode ``n``."""
    if not 0 < theta < alpha:
        raise ValueError("need 0 < theta < alpha (the moment diverges at theta = alpha)")
    return stable_abs_moment(theta, alpha, stable_scale(n, math.inf, alpha, sigma, nu, policy))


def ou_filtered_kernel(n: int, s, gamma: float, nu: float, step: float = 0.25,
                       policy: BesselEvalPolicy = DEFAULT_POLICY) -> np.ndarray:
    """``F_n(s) = H_n(s) - gamma * int_0^s H_n(u) exp(-gamma (s - u)) du``.

    The inner integral is accumulated over a merged grid (the requested
    points plus a uniform grid of width ``step``) with one 15-point Kronrod
    panel per gap.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("arguments must be finite and nonnegative")
    top = float(s.max()) if s.size else 0.0
    grid = np.unique(np.concatenate([s, np.arange(0.0, top, step)[1:], [0.0]]))
    lo, hi = grid[:-1], grid[1:]
    half = 0.5 * (hi - lo)
    u = (0.5 * (lo + hi))[:, None] + half[:, None] * NODES[None, :]
    hu = kernel_table(n, u.ravel(), nu, policy)[:, n - 1].reshape(u.shape)
    pieces = half * np.einsum("j,ij->i", KRONROD_WEIGHTS, hu * np.exp(-gamma * (hi[:, None] - u)))
    decay = np.exp(-gamma * (hi - lo))
    inner = np.empty(grid.size)
    inner[0] = 0.0
    acc = 0.0
    for k in range(pieces.size):
        acc = decay[k] * acc + pieces[k]
        inner[k + 1] = acc
    pos = np.searchsorted(grid, s)
    return kernel_table(n, s, nu, policy)[:, n - 1] - gamma * inner[pos]


class OULimitVariance(NamedTuple):
    """Stationary variance of mode ``n`` under Gaussian OU forcing.

    ``closed_form = laplace_term + convolution_term``. ``laplace_term`` is the
    initial-condition contribution evaluated with the Laplace transform of
    ``H_n``; ``convolution_term`` alone is the limit of the variance when that
    contribution decays. ``path_estimate`` comes from simulation.
    """

    closed_form: float
    path_estimate: float
    path_se: float
    laplace_term: float
    convolution_term: float
    bound: float


def _filtered_power(n, alpha, gamma, nu):
    b = horizon(n, nu)
    return _abs_power_integral(lambda r: ou_filtered_kernel(n, r, gamma, nu), b, alpha, 1.0 / nu)


def ou_second_term_bound(n: int, gamma: float, nu: float, sigma: float) -> float:
    """``2 sigma^2 int_0^inf H_n^2 (4 gamma + exp(-2 gamma s)) ds``."""
    b = horizon(n, nu)
    res = integrate(lambda r: kernel_table(n, r, nu)[:, n - 1] ** 2 * (4 * gamma + np.exp(-2 * gamma * r)),
                    0.0, b, panels=_panels(b), epsabs=1e-300, epsrel=1e-10)
    return 2.0 * sigma ** 2 * res.value


def ou_path_ensemble(gamma: float, nu: float, sigma: float, rng: np.random.Generator, *,
                     paths: int = 20_000, dt: float = 0.005, t_end: float = 20.0,
                     truncation: int = 32, chunk: int = 5000) -> Ensemble:
    """Extended-system paths from 0 with a stationary OU start, run to ``t_end``."""
    from .simulation import simulate_chunked
    spec = GaussOU(gamma, sigma)
    return simulate_chunked(np.zeros(truncation), spec, t_end, dt, nu, rng, paths,
                            chunk=chunk, antithetic=True)


def ou_limit_variance(n: int, gamma: float, nu: float, sigma: float, *,
                      rng: np.random.Generator | None = None, ensemble: Ensemble | None = None,
                      **path_kw) -> OULimitVariance:
    """Both routes for the OU-forced stationary variance of mode ``n``.

    Pass ``ensemble`` to reuse one simulation across modes.
    """
    if n < 1:
        raise ValueError("modes are numbered from 1")
    if gamma <= 0 or nu <= 0:
        raise ValueError("gamma and nu must be positive")
    if sigma == 0:
        return OULimitVariance(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    laplace = gamma ** 2 * sigma ** 2 / (2 * gamma) * kernel_laplace_closed_form(n, gamma + nu) ** 2
    conv = sigma ** 2 * _filtered_power(n, 2.0, gamma, nu)
    if ensemble is None:
        ensemble = ou_path_ensemble(gamma, nu, sigma, rng or np.random.default_rng(0), **path_kw)
    x = ensemble.shell[:, n - 1]
    est = float(np.mean(x ** 2))
    # antithetic pairs are exactly symmetric, so squares pair up: use one half
    half = x[: x.size // 2] ** 2
    se = float(np.std(half, ddof=1) / math.sqrt(half.size))
    return OULimitVariance(laplace + conv, est, se, laplace, conv,
                           ou_second_term_bound(n, gamma, nu, sigma))


def stable_ou_limit_scale(n: int, alpha: float, gamma: float, nu: float, sigma: float,
                          include_initial: bool = True) -> float:
    """Stable scale of mode ``n`` in the limit under stable OU forcing.

    With ``include_initial`` the initial-condition term
    ``c0 gamma^alpha L^alpha`` (``c0 = sigma^alpha / (alpha gamma)``, ``L`` the
    Laplace transform of ``H_n`` at ``gamma + nu``) is added to the
    convolution term ``sigma^alpha int |F_n|^alpha``.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    if sigma == 0:
        return 0.0
    total = sigma ** alpha * _filtered_power(n, alpha, gamma, nu)
    if include_initial:
        c0 = sigma ** alpha / (alpha * gamma)
        total += c0 * gamma ** alpha * kernel_laplace_closed_form(n, gamma + nu) ** alpha
    return total ** (1.0 / alpha)


def sample_gaussian_cloud(mean, Sigma: CovarianceMatrix, size: int,
                          rng: np.random.Generator, antithetic: bool = False) -> np.ndarray:
    """``size`` draws of ``N(mean, Sigma)`` as rows; antithetic pairs ``mean +- S Z``."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (Sigma.dim,):
        raise ValueError("mean and covariance dimensions differ")
    w = np.linalg.eigvalsh(Sigma.entries)
    if w.size and w.min() < -SAMPLE_FLOOR * max(Sigma.trace, 1e-300):
        raise PSDError("covariance has a significantly negative eigenvalue")
    root = Sigma.sqrt()
    if antithetic:
        if size % 2:
            raise ValueError("antithetic clouds need an even size")
        z = rng.standard_normal((size // 2, Sigma.dim))
        z = np.concatenate([z, -z])
    else:
        z = rng.standard_normal((size, Sigma.dim))
    return mean + z @ root


def sample_gaussian_state(x, t: float, Sigma: CovarianceMatrix, params: LatticeParams,
                          rng: np.random.Generator) -> StateSample:
    """One draw of ``N(d(t;x), Sigma)`` on the leading ``Sigma.dim`` modes."""
    d = deterministic_solution(x, t, params)[: Sigma.dim]
    return StateSample(sample_gaussian_cloud(d, Sigma, 1, rng)[0])


class LimitNorm(NamedTuple):
    estimate: float
    jensen_upper: float
    std_error: float


def mean_limit_norm(law, n_samples: int, rng: np.random.Generator, *,
                    samples=None, dt: float = 0.02, truncation: int | None = None) -> LimitNorm:
    """Monte Carlo ``E||G||`` and its analytic upper bound.

    Gaussian laws (``CovarianceMatrix``) are sampled exactly and bounded by
    ``sqrt(trace)``. Stable laws (``StableScales``) are sampled by long-run
    simulation unless ``samples`` is given, and bounded by ``sum_n E|G_n|``
    (``||.||_2 <= ||.||_1``).
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if isinstance(law, CovarianceMatrix):
        upper = math.sqrt(max(law.trace, 0.0))
        if upper == 0.0:
            return LimitNorm(0.0, 0.0, 0.0)
        if samples is None:
            samples = sample_gaussian_cloud(np.zeros(law.dim), law, n_samples, rng)
    elif isinstance(law, StableScales):
        upper = sum(stable_abs_moment(1.0, law.alpha, s) for s in law.scales)
        if upper == 0.0:
            return LimitNorm(0.0, 0.0, 0.0)
        if samples is None:
            N = truncation or max(law.scales.size, 32)
            ens = stationary_ensemble(AlphaStable(law.alpha, law.sigma), LatticeParams(law.nu, N),
                                      n_samples, dt, burn_in_horizon(law.nu), rng, antithetic=False)
            samples = ens.shell
    else:
        raise TypeError("law must be a CovarianceMatrix or StableScales")
    norms = np.linalg.norm(np.asarray(samples, dtype=float), axis=1)
    se = float(np.std(norms, ddof=1) / math.sqrt(norms.size))
    return LimitNorm(float(norms.mean()), upper, se)


def second_moment_limit(spec, n: int, nu: float) -> float:
    """``E[L(1)^2] * int_0^inf H_n^2`` for drivers with second moments."""
    rate = second_moment_rate(spec)
    if rate is None:
        raise ValueError(f"{spec.variant} has no finite second-moment rate")
    return covariance_entry(n, n, math.inf, math.sqrt(rate), nu)


@dataclass
class SummabilityReport:
    """Terms, partial sums and split bounds for the mode series.

    Gaussian: ``term_n = int H_n^2``. Stable: ``term_n = (int |H_n|^alpha)^(theta/alpha)``.
    """

    nu: float
    alpha: float | None
    theta: float | None
    n_max: int
    terms: np.ndarray
    partial_sums: np.ndarray
    bound_small: np.ndarray
    bound_tail: np.ndarray
    relative_change: float
    converged: bool
    bounds_hold: bool

    @property
    def split_points(self) -> np.ndarray:
        return split_sequence(np.arange(1, self.terms.size + 1), self.nu)

    def rows(self):
        b = self.split_points
        for k in range(self.terms.size):
            yield (k + 1, float(b[k]), float(self.terms[k]), float(self.partial_sums[k]),
                   float(self.bound_small[k]), float(self.bound_tail[k]),
                   bool(self.terms[k] <= (self.bound_small[k] + self.bound_tail[k]) * (1 + 1e-9)))


def split_sequence(n, nu: float) -> np.ndarray:
    """``b_n = (3/nu) ln n + 1``."""
    return 3.0 / nu * np.log(np.asarray(n, dtype=float)) + 1.0


def _split_bounds(n, nu, alpha, theta):
    n = np.asarray(n, dtype=float)
    b = split_sequence(n, nu)
    if alpha is None:
        # small r: |J_n(2r)| <= r^n / n!;  large r: J_n^2 <= 1/2 and r >= 1
        log_small = 2 * np.log(n) + (2 * n - 1) * np.log(b) - 2 * gammaln(n + 1) - np.log(2 * n - 1)
        small = np.exp(log_small)
        tail = n ** 2 * np.exp(-2 * nu * b) / (4 * nu)
        return small, tail
    k = alpha * (n - 1) + 1
    log_small = theta * np.log(n) + theta / alpha * (k * np.log(b) - np.log(k)) - theta * gammaln(n + 1)
    small = np.exp(log_small)
    tail = n ** theta * (np.exp(-alpha * nu * b) / (alpha * nu)) ** (theta / alpha)
    return small, tail


def summability_report(nu: float, alpha: float | None = None, theta: float | None = None,
                       N_max: int = 80, rtol: float = 1e-6) -> SummabilityReport:
    """Partial sums up to ``2 N_max`` and the flatness test ``|S_2N - S_N| / S_N < rtol``."""
    if N_max < 10:
        raise ValueError("N_max must be at least 10")
    if (alpha is None) != (theta is None):
        raise ValueError("alpha and theta go together")
    if alpha is not None and not (1 < alpha < 2 and 0 < theta < alpha):
        raise ValueError("need 1 < alpha < 2 and 0 < theta < alpha")
    M = 2 * N_max
    if alpha is None:
        b = horizon(M, nu)
        res = integrate(lambda r: kernel_table(M, r, nu) ** 2, 0.0, b, panels=_panels(b),
                        epsabs=1e-18 / nu, epsrel=1e-10)
        terms = np.asarray(res.value)
    else:
        vals = []
        for n in range(1, M + 1):
            # terms below double resolution of the partial sum are skipped
            if vals and vals[-1] < 1e-20 * vals[0]:
                vals.append(0.0)
                continue
            ip = _abs_power_integral(lambda r, n=n: kernel_table(n, r, nu)[:, n - 1], horizon(n, nu),
                                     alpha, 1e-12 / nu)
            vals.append(ip ** (theta / alpha))
        terms = np.asarray(vals)
    partial = np.cumsum(terms)
    small, tail = _split_bounds(np.arange(1, M + 1), nu, alpha, theta)
    change = abs(partial[M - 1] - partial[N_max - 1]) / partial[N_max - 1]
    ok = bool(np.all(terms <= (small + tail) * (1 + 1e-9)))
    return SummabilityReport(nu, alpha, theta, N_max, terms, partial, small, tail,
                             float(change), bool(change < rtol), ok)
