"""Pure-Python reference kernels.

Same arithmetic, in the same order, as ``_kernels.pyx``; used when the
compiled extension is unavailable and as its test oracle. All functions
take C-contiguous 2-D float64 arrays (one row per run).
"""

import numpy as np


def kahan_cumsum(k0, inc):
    rows, n = inc.shape
    out = np.empty((rows, n + 1))
    for r in range(rows):
        s = float(k0[r])
        comp = 0.0
        row = inc[r].tolist()
        res = [s]
        for d in row:
            y = d - comp
            t = s + y
            comp = (t - s) - y
            s = t
            res.append(s)
        out[r] = res
    return out


def product_capital(k0, f):
    rows, n = f.shape
    out = np.empty((rows, n + 1))
    for r in range(rows):
        k = float(k0[r])
        res = [k]
        for v in f[r].tolist():
            k = k * (1.0 + v)
            res.append(k)
        out[r] = res
    return out


def _trap(t, k):
    if k == 0:
        if t <= 1.0:
            return 1.0
        if t <= 2.0:
            return 2.0 - t
        return 0.0
    if t <= k - 1:
        return 0.0
    if t <= k:
        return t - (k - 1)
    if t <= k + 1:
        return 1.0
    if t <= k + 2:
        return k + 2 - t
    return 0.0


def trapezoid_sums(t, weight_exp):
    """``G[r, n-1] = sum_{k=0}^{n-1} (k+1)**w * T_k(t[r, n-1])``."""
    rows, n = t.shape
    out = np.zeros((rows, n))
    for r in range(rows):
        row = t[r].tolist()
        res = []
        for i, tv in enumerate(row):
            rnd = i + 1
            lo = int(np.ceil(tv)) - 2 if tv < 1e300 else rnd
            if lo < 0:
                lo = 0
            hi = int(tv) + 1 if tv < 1e300 else rnd
            if hi > rnd - 1:
                hi = rnd - 1
            acc = 0.0
            for k in range(lo, hi + 1):
                v = _trap(tv, k)
                if v != 0.0:
                    acc += (k + 1.0) ** weight_exp * v
            res.append(acc)
        out[r] = res
    return out


def upcrossing_overlay(cap, a, b, k0):
    """Capital of the buy-below-a / sell-above-b overlay on ``cap``."""
    rows, m = cap.shape
    out = np.empty((rows, m))
    for r in range(rows):
        row = cap[r].tolist()
        s = k0
        active = False
        res = [s]
        for i in range(1, m):
            prev = row[i - 1]
            if not active and prev <= a:
                active = True
            elif active and prev >= b:
                active = False
            if active:
                s = s + (row[i] - prev)
            res.append(s)
        out[r] = res
    return out


def upcrossing_count(cap, a, b):
    rows, m = cap.shape
    out = np.zeros(rows, dtype=np.int64)
    for r in range(rows):
        below = False
        count = 0
        for v in cap[r].tolist():
            if v <= a:
                below = True
            elif below and v >= b:
                count += 1
                below = False
        out[r] = count
    return out
