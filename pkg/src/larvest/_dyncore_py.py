"""Pure-Python fallback for :mod:`larvest._dyncore`.

Same signatures and the same floating-point operation order, so results are
identical to the compiled kernel, only slower.
"""
import math

import numpy as np


def _node_slope(S, i, p, G, phase):
    # per-index derivative of the shape at node i, one-sided at branch ends
    if phase == 0:
        if i == 0:
            return S[1] - S[0]
        if i >= p:
            return S[p] - S[p - 1]
    else:
        if i <= p:
            return S[p + 1] - S[p]
        if i == G - 1:
            return S[G - 1] - S[G - 2]
    return 0.5 * (S[i + 1] - S[i - 1])


def _rate(S, D, G, du, a, b, ad, bd, p, phase, L, mode):
    if phase == 0:
        y = L
        if y < S[0]:
            y = S[0]
        lo = 0
        hi = p
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if S[mid] <= y:
                lo = mid
            else:
                hi = mid
    else:
        y = L
        if y > S[p]:
            y = S[p]
        lo = p
        hi = G - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if S[mid] >= y:
                lo = mid
            else:
                hi = mid
    slope = S[lo + 1] - S[lo]
    if slope == 0.0:
        frac = 0.0
    else:
        frac = (y - S[lo]) / slope
    u = (lo + frac) * du
    sq = math.sqrt(a * a + 4.0 * b * u)
    d0 = _node_slope(S, lo, p, G, phase)
    d1 = _node_slope(S, lo + 1, p, G, phase)
    rate = (d0 + frac * (d1 - d0)) / du * sq
    if mode == 1:
        t = 2.0 * u / (a + sq)
        dval = D[lo] + frac * (D[lo + 1] - D[lo])
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


class _Rows:
    """Row cache converting numpy rows to lists on first use."""

    def __init__(self, arr):
        self.arr = arr
        self.rows = {}

    def __getitem__(self, r):
        row = self.rows.get(r)
        if row is None:
            row = self.rows[r] = self.arr[r].tolist()
        return row


def _integrate(S, a, b, peak, frozen, D, ad, bd, mode, rows, i0, i_end, steps, step_off,
               out_len, out_phase):
    G = S.arr.shape[1]
    du = 1.0 / (G - 1)
    phase = 0
    L = S[rows[i0]][0]
    i = i0
    while True:
        r = rows[i]
        srow = S[r]
        if not frozen[r]:
            p = peak[r]
            if phase == 0 and L >= srow[p]:
                phase = 1
            if phase == 1 and L <= srow[G - 1]:
                phase = 2
        if out_len is not None:
            out_len[i - i0] = L
            out_phase[i - i0] = phase
        if phase == 2 or i == i_end:
            break
        if not frozen[r]:
            L = L + steps[step_off + i - i0] * _rate(srow, D[r] if mode == 1 else None, G, du,
                                                     a[r], b[r], ad[r], bd[r], peak[r], phase,
                                                     L, mode)
        i += 1
    return L, phase, i


def _lists(a, b, peak, frozen, ad, bd):
    return (np.asarray(a).tolist(), np.asarray(b).tolist(), np.asarray(peak).tolist(),
            np.asarray(frozen).tolist(), np.asarray(ad).tolist(), np.asarray(bd).tolist())


def trajectory(shapes, a, b, peak, frozen, dshapes, ad, bd, mode, rows, steps):
    n = len(rows)
    out_len = [math.nan] * n
    out_phase = [2] * n
    a, b, peak, frozen, ad, bd = _lists(a, b, peak, frozen, ad, bd)
    _, _, last = _integrate(_Rows(shapes), a, b, peak, frozen, _Rows(dshapes), ad, bd, mode,
                            np.asarray(rows).tolist(), 0, n - 1, np.asarray(steps).tolist(), 0,
                            out_len, out_phase)
    return np.array(out_len), np.array(out_phase, dtype=np.int8), last


def terminals(shapes, a, b, peak, frozen, dshapes, ad, bd, mode, rows, starts, steps):
    rows = np.asarray(rows).tolist()
    steps = np.asarray(steps).tolist()
    a, b, peak, frozen, ad, bd = _lists(a, b, peak, frozen, ad, bd)
    S, D = _Rows(shapes), _Rows(dshapes)
    i_end = len(rows) - 1
    nc = len(starts)
    out_len = np.empty(nc)
    out_phase = np.empty(nc, dtype=np.int8)
    out_stop = np.empty(nc, dtype=np.int64)
    for c, i0 in enumerate(np.asarray(starts).tolist()):
        L, phase, stop = _integrate(S, a, b, peak, frozen, D, ad, bd, mode, rows, i0, i_end,
                                    steps, i0, None, None)
        out_len[c] = L
        out_phase[c] = phase
        out_stop[c] = stop
    return out_len, out_phase, out_stop
