"""Compiled inner loops shared by the kernel, sinogram and reconstruction code.

Only plain arrays cross this boundary; the object-level API lives in the
public modules.
"""

import math

import numba as nb
import numpy as np

_JIT = dict(cache=True)


@nb.njit(**_JIT)
def pp_eval(x, start, coefs, left, right):
    """Evaluate a unit-piece piecewise polynomial (see bspline.PiecewisePoly)."""
    pos = x - start
    npieces = coefs.shape[0]
    if pos < 0.0:
        return left
    i = int(math.floor(pos))
    if i >= npieces:
        if pos == npieces:
            i = npieces - 1
        else:
            return right
    xi = pos - i
    acc = 0.0
    for k in range(coefs.shape[1] - 1, -1, -1):
        acc = acc * xi + coefs[i, k]
    return acc


@nb.njit(**_JIT)
def hermite(vals, ders, step, x):
    """Cubic Hermite interpolation on a uniform grid starting at 0 (caller checks range)."""
    s = x / step
    i = int(s)
    if i >= vals.shape[0] - 1:
        i = vals.shape[0] - 2
    s -= i
    y0 = vals[i]
    y1 = vals[i + 1]
    m0 = ders[i] * step
    m1 = ders[i + 1] * step
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1)


@nb.njit(**_JIT)
def even_series(a, coefs):
    """sum_k coefs[k] * a**-(2k+2) for a > 0."""
    inv2 = 1.0 / (a * a)
    acc = 0.0
    for k in range(coefs.shape[0] - 1, -1, -1):
        acc = acc * inv2 + coefs[k]
    return acc * inv2


@nb.njit(**_JIT)
def psi_eval(q, vals, ders, step, qmax, tail):
    """Even filtered kernel: table inside |q| < qmax, far-field series outside."""
    a = abs(q)
    if a < qmax:
        return hermite(vals, ders, step, a)
    return even_series(a, tail)


@nb.njit(**_JIT)
def radial_eval(r, vals, ders, step, rmax):
    if r >= rmax:
        return 0.0
    return hermite(vals, ders, step, r)


@nb.njit(**_JIT)
def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@nb.njit(**_JIT)
def psi_array(q, vals, ders, step, qmax, tail):
    out = np.empty(q.shape[0])
    for i in range(q.shape[0]):
        out[i] = psi_eval(q[i], vals, ders, step, qmax, tail)
    return out


@nb.njit(**_JIT)
def radial_array(r, vals, ders, step, rmax):
    out = np.empty(r.shape[0])
    for i in range(r.shape[0]):
        out[i] = radial_eval(r[i], vals, ders, step, rmax)
    return out


@nb.njit(**_JIT)
def pp_array(x, start, coefs, left, right):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = pp_eval(x[i], start, coefs, left, right)
    return out
