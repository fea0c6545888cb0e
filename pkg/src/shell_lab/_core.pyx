# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Bessel tables and the explicit Euler lattice step.

Both functions mirror ``shell_lab._fallback`` operation for operation so the
two backends agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, ceil

cnp.import_array()

cdef double _RESCALE_AT = 1e100
cdef double _RESCALE_BY = 1e-100


cdef void _series_row(double s, int nmax, int max_terms, double* row) noexcept nogil:
    cdef double h = 0.5 * s
    cdef double h2 = h * h
    cdef double lead = 1.0
    cdef double term, total
    cdef int n, k
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * h / n
        if lead == 0.0:
            row[n] = 0.0
            continue
        term = lead
        total = lead
        for k in range(max_terms):
            term = -term * h2 / ((k + 1.0) * (k + n + 1.0))
            total = total + term
            if fabs(term) <= 1e-17 * fabs(total):
                break
        row[n] = total


cdef void _miller_row(double s, int nmax, int headroom, double* row) noexcept nogil:
    cdef int extra = <int>ceil(s)
    cdef int top = (nmax if nmax > extra else extra) + headroom + extra
    cdef int k, i, hi
    cdef double jp1 = 0.0
    cdef double jk = 1e-30
    cdef double jm1, scale
    cdef double sumsq = 0.0
    cdef double evensum = 0.0
    if top % 2 == 1:
        top += 1
    for i in range(nmax + 1):
        row[i] = 0.0
    k = top
    while k >= 1:
        if k <= nmax:
            row[k] = jk
        sumsq = sumsq + 2.0 * jk * jk
        if k % 2 == 0:
            evensum = evensum + 2.0 * jk
        jm1 = (2.0 * k / s) * jk - jp1
        jp1 = jk
        jk = jm1
        if fabs(jk) > _RESCALE_AT:
            jk = jk * _RESCALE_BY
            jp1 = jp1 * _RESCALE_BY
            sumsq = sumsq * _RESCALE_BY * _RESCALE_BY
            evensum = evensum * _RESCALE_BY
            hi = nmax if nmax < top else top
            for i in range(k, hi + 1):
                row[i] = row[i] * _RESCALE_BY
        k -= 1
    row[0] = jk
    sumsq = sumsq + jk * jk
    evensum = evensum + jk
    scale = 1.0 / sqrt(sumsq)
    if evensum < 0.0:
        scale = -scale
    for i in range(nmax + 1):
        row[i] = row[i] * scale


def bessel_table(const double[::1] s, int nmax, double series_cutoff,
                 int headroom, int max_terms=200):
    """J_0..J_nmax at every argument in ``s`` (all ``s >= 0``)."""
    cdef Py_ssize_t m = s.shape[0]
    cdef Py_ssize_t i
    cdef int n
    out = np.zeros((m, nmax + 1), dtype=np.float64)
    cdef double[:, ::1] view = out
    with nogil:
        for i in range(m):
            if s[i] == 0.0:
                view[i, 0] = 1.0
            elif s[i] <= series_cutoff:
                _series_row(s[i], nmax, max_terms, &view[i, 0])
            else:
                _miller_row(s[i], nmax, headroom, &view[i, 0])
    return out


def em_advance(double[:, ::1] state, const double[:, ::1] forcing, double dt, double nu):
    """Advance every row of ``state`` by ``forcing.shape[1]`` explicit Euler steps.

    Row ``p`` receives ``forcing[p, k]`` on mode 1 during step ``k``.
    """
    cdef Py_ssize_t paths = state.shape[0]
    cdef Py_ssize_t modes = state.shape[1]
    cdef Py_ssize_t steps = forcing.shape[1]
    cdef Py_ssize_t p, k, n
    cdef double prev, cur
    cdef double* x
    if forcing.shape[0] != paths:
        raise ValueError("forcing rows must match state rows")
    if modes < 2:
        raise ValueError("at least two modes are required")
    with nogil:
        for p in range(paths):
            x = &state[p, 0]
            for k in range(steps):
                prev = x[0]
                x[0] = x[0] + dt * (-x[1] - nu * x[0]) + forcing[p, k]
                for n in range(1, modes - 1):
                    cur = x[n]
                    x[n] = cur + dt * (prev - x[n + 1] - nu * cur)
                    prev = cur
                cur = x[modes - 1]
                x[modes - 1] = cur + dt * (prev - nu * cur)
