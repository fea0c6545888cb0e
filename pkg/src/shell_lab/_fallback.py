"""Pure numpy versions of the compiled kernels in ``_core.pyx``."""

import math

import numpy as np

_RESCALE_AT = 1e100
_RESCALE_BY = 1e-100


def _series_rows(s, nmax, max_terms):
    h = 0.5 * s
    h2 = h * h
    out = np.zeros((s.size, nmax + 1))
    lead = np.ones_like(s)
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * h / n
        term = lead.copy()
        total = lead.copy()
        live = lead != 0.0
        for k in range(max_terms):
            if not live.any():
                break
            term = np.where(live, -term * h2 / ((k + 1.0) * (k + n + 1.0)), 0.0)
            total = total + term
            live &= np.abs(term) > 1e-17 * np.abs(total)
        out[:, n] = total
    return out


def _miller_rows(s, nmax, headroom):
    extra = int(math.ceil(float(s.max())))
    top = max(nmax, extra) + headroom + extra
    if top % 2 == 1:
        top += 1
    m = s.size
    out = np.zeros((m, nmax + 1))
    jp1 = np.zeros(m)
    jk = np.full(m, 1e-30)
    sumsq = np.zeros(m)
    evensum = np.zeros(m)
    for k in range(top, 0, -1):
        if k <= nmax:
            out[:, k] = jk
        sumsq = sumsq + 2.0 * jk * jk
        if k % 2 == 0:
            evensum = evensum + 2.0 * jk
        jm1 = (2.0 * k / s) * jk - jp1
        jp1 = jk
        jk = jm1
        big = np.abs(jk) > _RESCALE_AT
        if big.any():
            jk = np.where(big, jk * _RESCALE_BY, jk)
            jp1 = np.where(big, jp1 * _RESCALE_BY, jp1)
            sumsq = np.where(big, sumsq * _RESCALE_BY * _RESCALE_BY, sumsq)
            evensum = np.where(big, evensum * _RESCALE_BY, evensum)
            if k <= nmax:
                out[big, k:] *= _RESCALE_BY
    out[:, 0] = jk
    sumsq = sumsq + jk * jk
    evensum = evensum + jk
    scale = 1.0 / np.sqrt(sumsq)
    scale = np.where(evensum < 0.0, -scale, scale)
    return out * scale[:, None]


def bessel_table(s, nmax, series_cutoff, headroom, max_terms=200):
    s = np.ascontiguousarray(s, dtype=np.float64)
    out = np.zeros((s.size, nmax + 1))
    zero = s == 0.0
    small = (~zero) & (s <= series_cutoff)
    large = s > series_cutoff
    out[zero, 0] = 1.0
    if small.any():
        out[small] = _series_rows(s[small], nmax, max_terms)
    if large.any():
        out[large] = _miller_rows(s[large], nmax, headroom)
    return out


def em_advance(state, forcing, dt, nu):
    if forcing.shape[0] != state.shape[0]:
        raise ValueError("forcing rows must match state rows")
    if state.shape[1] < 2:
        raise ValueError("at least two modes are required")
    drift = np.empty_like(state)
    for k in range(forcing.shape[1]):
        x = state
        drift[:, 0] = -x[:, 1] - nu * x[:, 0]
        drift[:, 1:-1] = x[:, :-2] - x[:, 2:] - nu * x[:, 1:-1]
        drift[:, -1] = x[:, -2] - nu * x[:, -1]
        state += dt * drift
        state[:, 0] += forcing[:, k]
