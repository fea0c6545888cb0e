"""Forcing processes: increments, OU coordinates and stationary initial laws.

Every sampler takes an explicit ``numpy.random.Generator``. Parallel Monte
Carlo derives child generators with :func:`stream` or ``Generator.spawn`` so
results depend only on the master seed and the stream index.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np


class DriverError(ValueError):
    """Invalid driver parameters or an operation the driver does not support."""


def _positive(name, value, allow_zero=False):
    value = float(value)
    ok = value >= 0 if allow_zero else value > 0
    if not (math.isfinite(value) and ok):
        raise DriverError(f"{name} must be {'nonnegative' if allow_zero else 'positive'} and finite, got {value!r}")
    return value


def _stable_alpha(alpha):
    alpha = float(alpha)
    if not (1.0 < alpha < 2.0):
        raise DriverError(f"alpha must lie in (1, 2), got {alpha!r}")
    return alpha


@dataclass(frozen=True)
class Brownian:
    sigma: float = 1.0
    variant = "brownian"

    def __post_init__(self):
        _positive("sigma", self.sigma, allow_zero=True)


@dataclass(frozen=True)
class AlphaStable:
    alpha: float = 1.5
    sigma: float = 1.0
    variant = "alpha_stable"

    def __post_init__(self):
        _stable_alpha(self.alpha)
        _positive("sigma", self.sigma, allow_zero=True)


@dataclass(frozen=True)
class GaussOU:
    gamma: float = 1.0
    sigma: float = 1.0
    variant = "gauss_ou"

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("sigma", self.sigma, allow_zero=True)


@dataclass(frozen=True)
class StableOU:
    alpha: float = 1.5
    gamma: float = 1.0
    sigma: float = 1.0
    variant = "stable_ou"

    def __post_init__(self):
        _stable_alpha(self.alpha)
        _positive("gamma", self.gamma)
        _positive("sigma", self.sigma, allow_zero=True)


@dataclass(frozen=True)
class CompoundPoisson:
    """Symmetric jumps of size ``+-magnitude`` at Poisson ``rate``.

    The default realises ``E[L(1)^2] = rate * magnitude^2 = 1/2``.
    """

    rate: float = 2.0
    magnitude: float = 0.5
    variant = "compound_poisson"

    def __post_init__(self):
        _positive("rate", self.rate)
        _positive("magnitude", self.magnitude, allow_zero=True)


DriverSpec = Brownian | AlphaStable | GaussOU | StableOU | CompoundPoisson
VARIANTS = {cls.variant: cls for cls in (Brownian, AlphaStable, GaussOU, StableOU, CompoundPoisson)}
OU_VARIANTS = (GaussOU, StableOU)


def driver_to_dict(spec: DriverSpec) -> dict:
    return {"variant": spec.variant, **asdict(spec)}


def driver_from_dict(data: dict) -> DriverSpec:
    data = dict(data)
    try:
        cls = VARIANTS[data.pop("variant")]
    except KeyError as exc:
        raise DriverError(f"unknown or missing driver variant: {exc}") from None
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise DriverError(f"unknown {cls.variant} parameters: {sorted(extra)}")
    return cls(**{k: float(v) for k, v in data.items()})


def with_amplitude(spec: DriverSpec, amplitude: float) -> DriverSpec:
    """Copy of ``spec`` with the noise amplitude replaced (``magnitude`` for jumps)."""
    if isinstance(spec, CompoundPoisson):
        return CompoundPoisson(spec.rate, amplitude)
    return type(spec)(**{**asdict(spec), "sigma": amplitude})


def amplitude(spec: DriverSpec) -> float:
    return spec.magnitude if isinstance(spec, CompoundPoisson) else spec.sigma


def is_ou(spec: DriverSpec) -> bool:
    return isinstance(spec, OU_VARIANTS)


def stable_index(spec: DriverSpec) -> float | None:
    """The stability index alpha for stable drivers, else None."""
    return spec.alpha if isinstance(spec, (AlphaStable, StableOU)) else None


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for worker ``index`` under master ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


@dataclass(frozen=True)
class PathGrid:
    t_end: float
    dt: float

    def __post_init__(self):
        _positive("t_end", self.t_end)
        _positive("dt", self.dt)
        if self.dt > self.t_end:
            raise DriverError("dt must not exceed t_end")

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))


@dataclass
class DriverPath:
    """Increments of L over each grid step; OU variants also carry A_0(t_k), k = 0..steps."""

    increments: np.ndarray
    ou_state: np.ndarray | None = None


def sample_alpha_stable(alpha: float, scale: float, rng: np.random.Generator, size=None):
    """Symmetric alpha-stable draws with ``E exp(iuX) = exp(-(scale |u|)^alpha)``.

    Chambers-Mallows-Stuck construction from a uniform angle and a unit
    exponential.
    """
    alpha = _stable_alpha(alpha)
    scale = _positive("scale", scale, allow_zero=True)
    v = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    w = rng.standard_exponential(size=size)
    if scale == 0.0:
        return np.zeros_like(v) if size is not None else 0.0
    x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
         * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))
    out = scale * x
    return float(out) if size is None else out


def ou_step_factors(spec: GaussOU | StableOU, dt: float) -> tuple[float, float]:
    """Decay factor and exact innovation scale of the OU coordinate over ``dt``.

    Gaussian: innovation standard deviation. Stable: innovation stable scale.
    """
    decay = math.exp(-spec.gamma * dt)
    if isinstance(spec, GaussOU):
        return decay, spec.sigma * math.sqrt(-math.expm1(-2.0 * spec.gamma * dt) / (2.0 * spec.gamma))
    a = spec.alpha
    return decay, (spec.sigma ** a * -math.expm1(-a * spec.gamma * dt) / (a * spec.gamma)) ** (1.0 / a)


def stationary_ou_scale(spec: GaussOU | StableOU) -> float:
    """Standard deviation (Gauss) or stable scale (stable) of the invariant law."""
    if isinstance(spec, GaussOU):
        return spec.sigma / math.sqrt(2.0 * spec.gamma)
    if isinstance(spec, StableOU):
        return (spec.sigma ** spec.alpha / (spec.alpha * spec.gamma)) ** (1.0 / spec.alpha)
    raise DriverError(f"{spec.variant} has no OU coordinate")


def stationary_ou_initial(spec: DriverSpec, rng: np.random.Generator, size=None):
    """Draw(s) of the OU coordinate from its invariant law."""
    scale = stationary_ou_scale(spec)
    if isinstance(spec, GaussOU):
        out = scale * rng.standard_normal(size=size)
    elif scale == 0.0:
        out = np.zeros(size) if size is not None else 0.0
    else:
        out = sample_alpha_stable(spec.alpha, scale, rng, size=size)
    return float(out) if size is None else out


def second_moment_rate(spec: DriverSpec) -> float | None:
    """``E[L(1)^2]`` for independent-increment drivers with second moments."""
    if isinstance(spec, Brownian):
        return spec.sigma ** 2
    if isinstance(spec, CompoundPoisson):
        return spec.rate * spec.magnitude ** 2
    return None


def sample_increments(spec: DriverSpec, shape, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Independent-increment draws of shape ``shape`` over steps of length ``dt``.

    For OU variants these are the increments of the underlying noise
    (Brownian or stable innovations of the exact OU update).
    """
    if isinstance(spec, Brownian):
        return spec.sigma * math.sqrt(dt) * rng.standard_normal(size=shape)
    if isinstance(spec, AlphaStable):
        return sample_alpha_stable(spec.alpha, spec.sigma * dt ** (1.0 / spec.alpha), rng, size=shape)
    if isinstance(spec, CompoundPoisson):
        counts = rng.poisson(spec.rate * dt, size=shape)
        ups = rng.binomial(counts, 0.5)
        return spec.magnitude * (2 * ups - counts).astype(float)
    _, innovation = ou_step_factors(spec, dt)
    if isinstance(spec, GaussOU):
        return innovation * rng.standard_normal(size=shape)
    if innovation == 0.0:
        return np.zeros(shape)
    return sample_alpha_stable(spec.alpha, innovation, rng, size=shape)


def ou_trajectory(spec: GaussOU | StableOU, start, innovations, dt: float) -> np.ndarray:
    """Exact OU recursion; returns states with shape ``innovations.shape[:-1] + (steps + 1,)``."""
    decay, _ = ou_step_factors(spec, dt)
    start = np.asarray(start, dtype=float)
    states = np.empty(innovations.shape[:-1] + (innovations.shape[-1] + 1,))
    states[..., 0] = start
    for k in range(innovations.shape[-1]):
        states[..., k + 1] = decay * states[..., k] + innovations[..., k]
    return states


def sample_path(spec: DriverSpec, grid: PathGrid, rng: np.random.Generator, ou_start=None) -> DriverPath:
    """One driver path on ``grid``.

    OU variants start from ``ou_start`` (drawn from the invariant law when
    omitted) and report ``increments = diff(A_0)``.
    """
    for name in ("t_end", "dt"):
        if not math.isfinite(getattr(grid, name)):
            raise DriverError(f"{name} must be finite")
    steps = grid.steps
    if not is_ou(spec):
        return DriverPath(np.asarray(sample_increments(spec, (steps,), grid.dt, rng), dtype=float))
    if ou_start is None:
        ou_start = stationary_ou_initial(spec, rng)
    innovations = sample_increments(spec, (steps,), grid.dt, rng)
    states = ou_trajectory(spec, ou_start, innovations, grid.dt)
    return DriverPath(np.diff(states), states)
