"""Euler-Maruyama path oracle for the truncated lattice.

Noise enters mode 1. OU drivers carry an extra coordinate ``A_0`` that is
advanced exactly and fed into mode 1 through its increments.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .drivers import DriverSpec, is_ou, ou_step_factors, sample_increments, stationary_ou_initial

STABILITY_MARGIN = 0.5
BLOCK_ELEMENTS = 1 << 21


class SimulationError(ArithmeticError):
    """The explicit scheme blew up."""


@dataclass
class StateSample:
    """A shell state, plus the OU coordinate for extended systems."""

    shell: np.ndarray
    ou_coordinate: float | None = None


@dataclass
class Ensemble:
    """Stacked states: ``shell`` is ``(paths, N)``, ``ou`` is ``(paths,)`` or None."""

    shell: np.ndarray
    ou: np.ndarray | None = None

    def __len__(self):
        return self.shell.shape[0]

    def sample(self, i: int) -> StateSample:
        return StateSample(self.shell[i].copy(), None if self.ou is None else float(self.ou[i]))


def check_step(dt: float, nu: float):
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError("dt must be positive and finite")
    if dt * (2.0 + nu) >= STABILITY_MARGIN:
        raise ValueError(f"dt={dt} violates dt*(2+nu) < {STABILITY_MARGIN}")


def _expand(base, antithetic, replicas):
    if antithetic:
        base = np.concatenate([base, -base])
    if replicas > 1:
        base = np.tile(base, (replicas,) + (1,) * (base.ndim - 1))
    return base


def simulate_ensemble(x0, spec: DriverSpec, t_end: float, dt: float, nu: float,
                      rng: np.random.Generator, *, n_paths: int | None = None,
                      ou0=None, antithetic: bool = False, replicas: int = 1) -> Ensemble:
    """Run ``n_paths`` Euler-Maruyama paths from ``x0`` up to ``t_end``.

    ``replicas`` copies of the same noise are laid out block after block (the
    synchronous coupling); ``antithetic`` pairs every noise draw with its
    negative inside each block. ``ou0`` gives the initial OU coordinate per
    path and defaults to invariant draws that follow the same layout.
    """
    x0 = np.asarray(x0, dtype=float)
    if n_paths is None:
        n_paths = x0.shape[0] if x0.ndim == 2 else 1
    modes = x0.shape[-1]
    if modes < 2:
        raise ValueError("at least two modes are required")
    check_step(dt, nu)
    if t_end < 0 or not math.isfinite(t_end):
        raise ValueError("t_end must be finite and nonnegative")
    if n_paths % replicas:
        raise ValueError("n_paths must be a multiple of replicas")
    base = n_paths // replicas
    if antithetic and base % 2:
        raise ValueError("antithetic sampling needs an even number of paths per replica")
    draws = base // 2 if antithetic else base

    state = np.array(np.broadcast_to(x0, (n_paths, modes)), dtype=float, order="C")
    ou = None
    if is_ou(spec):
        if ou0 is None:
            ou0 = _expand(np.asarray(stationary_ou_initial(spec, rng, size=draws)), antithetic, replicas)
        ou = np.array(np.broadcast_to(np.asarray(ou0, dtype=float), (n_paths,)))
        decay, _ = ou_step_factors(spec, dt)

    steps = math.ceil(t_end / dt - 1e-9) if t_end > 0 else 0
    limit = 1e6 * (np.abs(x0).max() if x0.size else 0.0) + 1e6
    if ou is not None:
        limit += 1e6 * float(np.abs(ou).max())
    block = max(1, BLOCK_ELEMENTS // max(1, n_paths))
    done = 0
    while done < steps:
        width = min(block, steps - done)
        noise = _expand(sample_increments(spec, (draws, width), dt, rng), antithetic, replicas)
        if ou is not None:
            incr = np.empty_like(noise)
            for k in range(width):
                nxt = decay * ou + noise[:, k]
                incr[:, k] = nxt - ou
                ou = nxt
            noise = incr
        _kernels.em_advance(state, np.ascontiguousarray(noise), dt, nu)
        done += width
        peak = np.abs(state).max()
        if not np.isfinite(peak) or peak > limit:
            raise SimulationError(
                f"path norm {peak:.3e} exceeded {limit:.3e} after {done} of {steps} steps "
                f"(dt={dt}, nu={nu})")
    return Ensemble(state, ou)


def simulate_chunked(x0, spec: DriverSpec, t_end: float, dt: float, nu: float,
                     rng: np.random.Generator, n_paths: int, *, chunk: int = 8192,
                     workers: int = 1, **kwargs) -> Ensemble:
    """Split ``n_paths`` into fixed chunks with spawned generators and concatenate.

    The result depends on ``chunk`` but not on ``workers``.
    """
    sizes = [chunk] * (n_paths // chunk)
    if n_paths % chunk:
        sizes.append(n_paths % chunk)
    children = rng.spawn(len(sizes))

    def run(i):
        return simulate_ensemble(x0, spec, t_end, dt, nu, children[i], n_paths=sizes[i], **kwargs)

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    ou = None if parts[0].ou is None else np.concatenate([p.ou for p in parts])
    return Ensemble(np.concatenate([p.shell for p in parts]), ou)


def simulate_state_path(x, spec: DriverSpec, t_end: float, dt: float, params,
                        rng: np.random.Generator, ou0: float | None = None) -> StateSample:
    """One Euler-Maruyama path of the truncated system; the state at ``t_end``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.truncation,):
        raise ValueError(f"expected {params.truncation} modes")
    ens = simulate_ensemble(x, spec, t_end, dt, params.nu, rng, n_paths=1,
                            ou0=None if ou0 is None else [ou0])
    return ens.sample(0)


def stationary_ensemble(spec: DriverSpec, params, n_paths: int, dt: float, t_burn: float,
                        rng: np.random.Generator, *, antithetic: bool = True,
                        chunk: int = 8192, workers: int = 1) -> Ensemble:
    """Approximate draws of the invariant law: paths from 0 run for ``t_burn``."""
    x0 = np.zeros(params.truncation)
    return simulate_chunked(x0, spec, t_burn, dt, params.nu, rng, n_paths, chunk=chunk,
                            workers=workers, antithetic=antithetic)


def burn_in_horizon(nu: float, gamma: float | None = None) -> float:
    """``max(20, 10/nu) / min(1, gamma)`` (gamma only for OU drivers)."""
    horizon = max(20.0, 10.0 / nu)
    if gamma is not None:
        horizon /= min(1.0, gamma)
    return horizon
