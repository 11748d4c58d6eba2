# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward-Euler integration of the dynamic growth model.

Mirrors ``_dyncore_py`` operation for operation (built with
``-ffp-contract=off``), so both backends return identical numbers.

Inputs describe the growth field at a sequence of temperatures: row ``r`` of
``shapes`` is the blended shape sampled on a uniform grid over [0, 1], ``a`` and
``b`` the blended warp coefficients, ``peak`` the argmax of the row and
``frozen`` flags rows at or below the developmental threshold. ``rows[i]``
selects the row used at time-grid point ``i``.

Phase codes: 0 feeding, 1 post-feeding, 2 pupated.
"""
from libc.math cimport sqrt

import numpy as np


cdef inline double _node_slope(const double[:, ::1] S, Py_ssize_t r, Py_ssize_t i,
                               Py_ssize_t p, Py_ssize_t G, int phase) noexcept nogil:
    # per-index derivative of the shape at node i, one-sided at branch ends
    if phase == 0:
        if i == 0:
            return S[r, 1] - S[r, 0]
        if i >= p:
            return S[r, p] - S[r, p - 1]
    else:
        if i <= p:
            return S[r, p + 1] - S[r, p]
        if i == G - 1:
            return S[r, G - 1] - S[r, G - 2]
    return 0.5 * (S[r, i + 1] - S[r, i - 1])


cdef inline double _rate(const double[:, ::1] S, const double[:, ::1] D, Py_ssize_t r,
                         Py_ssize_t G, double du, double a, double b, double ad, double bd,
                         Py_ssize_t p, int phase, double L, int mode) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    cdef double y, slope, frac, u, sq, rate, t, dval, drate, d0, d1
    if phase == 0:
        y = L
        if y < S[r, 0]:
            y = S[r, 0]
        lo = 0
        hi = p
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if S[r, mid] <= y:
                lo = mid
            else:
                hi = mid
    else:
        y = L
        if y > S[r, p]:
            y = S[r, p]
        lo = p
        hi = G - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if S[r, mid] >= y:
                lo = mid
            else:
                hi = mid
    slope = S[r, lo + 1] - S[r, lo]
    if slope == 0.0:
        frac = 0.0
    else:
        frac = (y - S[r, lo]) / slope
    u = (lo + frac) * du
    sq = sqrt(a * a + 4.0 * b * u)
    d0 = _node_slope(S, r, lo, p, G, phase)
    d1 = _node_slope(S, r, lo + 1, p, G, phase)
    rate = (d0 + frac * (d1 - d0)) / du * sq
    if mode == 1:
        t = 2.0 * u / (a + sq)
        dval = D[r, lo] + frac * (D[r, lo + 1] - D[r, lo])
        drate = dval * (ad + 2.0 * bd * t)
        if phase == 0:
            if drate > 0.0:
                rate = drate
        else:
            if drate < 0.0:
                rate = drate
    if phase == 0:
        if rate < 0.0:
            rate = 0.0
    else:
        if rate > 0.0:
            rate = 0.0
    return rate


cdef Py_ssize_t _integrate(const double[:, ::1] S, const double[::1] a, const double[::1] b,
                           const long long[::1] peak, const unsigned char[::1] frozen,
                           const double[:, ::1] D, const double[::1] ad, const double[::1] bd,
                           int mode, const long long[::1] rows, Py_ssize_t i0, Py_ssize_t i_end,
                           const double[::1] steps, double[::1] out_len, signed char[::1] out_phase,
                           bint record, double* term_len, int* term_phase) noexcept nogil:
    cdef Py_ssize_t G = S.shape[1]
    cdef double du = 1.0 / (G - 1)
    cdef Py_ssize_t i, r, p
    cdef double L
    cdef int phase = 0
    r = rows[i0]
    L = S[r, 0]
    i = i0
    while True:
        r = rows[i]
        if not frozen[r]:
            p = peak[r]
            if phase == 0 and L >= S[r, p]:
                phase = 1
            if phase == 1 and L <= S[r, G - 1]:
                phase = 2
        if record:
            out_len[i - i0] = L
            out_phase[i - i0] = phase
        if phase == 2 or i == i_end:
            break
        if not frozen[r]:
            L = L + steps[i - i0] * _rate(S, D, r, G, du, a[r], b[r], ad[r], bd[r],
                                          peak[r], phase, L, mode)
        i += 1
    term_len[0] = L
    term_phase[0] = phase
    return i


def trajectory(const double[:, ::1] shapes, const double[::1] a, const double[::1] b,
               const long long[::1] peak, const unsigned char[::1] frozen,
               const double[:, ::1] dshapes, const double[::1] ad, const double[::1] bd,
               int mode, const long long[::1] rows, const double[::1] steps):
    """Integrate one trajectory over ``len(rows)`` grid points.

    Returns ``(lengths, phases, last)``; entries after pupation are NaN / 2 and
    ``last`` is the index of the final defined point.
    """
    cdef Py_ssize_t n = rows.shape[0]
    out_len = np.full(n, np.nan)
    out_phase = np.full(n, 2, dtype=np.int8)
    cdef double[::1] ol = out_len
    cdef signed char[::1] op = out_phase
    cdef double tl
    cdef int tp
    cdef Py_ssize_t last
    with nogil:
        last = _integrate(shapes, a, b, peak, frozen, dshapes, ad, bd, mode, rows,
                          0, n - 1, steps, ol, op, True, &tl, &tp)
    return out_len, out_phase, last


def terminals(const double[:, ::1] shapes, const double[::1] a, const double[::1] b,
              const long long[::1] peak, const unsigned char[::1] frozen,
              const double[:, ::1] dshapes, const double[::1] ad, const double[::1] bd,
              int mode, const long long[::1] rows, const long long[::1] starts,
              const double[::1] steps):
    """Terminal state of trajectories starting at lattice points ``starts``.

    Every trajectory ends at the last lattice point; ``steps[i]`` is the step
    from lattice point ``i`` to ``i + 1``. Returns ``(length, phase, stop)``
    where ``stop`` is the lattice index where integration ended (the
    pupation point for pupated trajectories).
    """
    cdef Py_ssize_t nc = starts.shape[0]
    cdef Py_ssize_t i_end = rows.shape[0] - 1
    out_len = np.empty(nc)
    out_phase = np.empty(nc, dtype=np.int8)
    out_stop = np.empty(nc, dtype=np.int64)
    cdef double[::1] ol = out_len
    cdef signed char[::1] op = out_phase
    cdef long long[::1] os = out_stop
    cdef Py_ssize_t c, i0
    cdef double tl
    cdef int tp
    with nogil:
        for c in range(nc):
            i0 = starts[c]
            os[c] = _integrate(shapes, a, b, peak, frozen, dshapes, ad, bd, mode,
                               rows, i0, i_end, steps[i0:], ol, op, False, &tl, &tp)
            ol[c] = tl
            op[c] = tp
    return out_len, out_phase, out_stop
