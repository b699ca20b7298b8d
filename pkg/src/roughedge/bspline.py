"""Centered B-splines on the integer lattice and their Hilbert-filtered derivatives.

Every kernel in the toolkit is a centered cardinal B-spline ``beta_n`` (the
(n+1)-fold convolution of the unit box), so all of them are piecewise
polynomials with unit-spaced breakpoints.  Coefficients are generated exactly
with rational arithmetic from the truncated-power representation

    beta_n(x) = sum_k (-1)^k C(n+1, k) (x + (n+1)/2 - k)_+^n / n!

and only converted to floats at the end.
"""

from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np


class PiecewisePoly:
    """Piecewise polynomial with unit-length pieces starting at ``start``.

    ``coefs[i, k]`` multiplies ``(x - start - i)**k`` on piece ``i``.  Outside
    the covered range the function is the constant ``left`` / ``right``.
    """

    def __init__(self, start, coefs, left=0.0, right=0.0):
        self.start = float(start)
        self.coefs = np.ascontiguousarray(coefs, dtype=float)
        self.left = float(left)
        self.right = float(right)

    @property
    def npieces(self):
        return self.coefs.shape[0]

    @property
    def stop(self):
        return self.start + self.npieces

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pos = x - self.start
        idx = np.floor(pos).astype(np.int64)
        inside = (idx >= 0) & (idx < self.npieces)
        i = np.clip(idx, 0, self.npieces - 1)
        xi = pos - i
        c = self.coefs[i]
        out = np.zeros_like(xi)
        for k in range(self.coefs.shape[1] - 1, -1, -1):
            out = out * xi + c[..., k]
        out = np.where(inside, out, np.where(pos < 0, self.left, self.right))
        # the right endpoint belongs to the last piece
        at_stop = pos == self.npieces
        if np.any(at_stop):
            out = np.where(at_stop, self.coefs[-1].sum(), out)
        return out

    def derivative(self):
        deg = self.coefs.shape[1] - 1
        if deg == 0:
            return PiecewisePoly(self.start, np.zeros((self.npieces, 1)))
        k = np.arange(1, deg + 1)
        return PiecewisePoly(self.start, self.coefs[:, 1:] * k)

    def antiderivative(self):
        """Antiderivative vanishing at ``start`` (left constant must be zero)."""
        if self.left != 0.0:
            raise ValueError("antiderivative needs a zero left extension")
        n, m = self.coefs.shape
        out = np.zeros((n, m + 1))
        out[:, 1:] = self.coefs / np.arange(1, m + 1)
        acc = 0.0
        for i in range(n):
            out[i, 0] = acc
            acc = out[i].sum()
        return PiecewisePoly(self.start, out, left=0.0, right=acc)

    def times_x(self):
        """The piecewise polynomial ``x * p(x)`` (extensions must vanish)."""
        n, m = self.coefs.shape
        out = np.zeros((n, m + 1))
        origin = self.start + np.arange(n)
        out[:, 1:] += self.coefs
        out[:, :-1] += self.coefs * origin[:, None]
        return PiecewisePoly(self.start, out)


@lru_cache(maxsize=None)
def _exact_pieces(n):
    """Ascending local coefficients of beta_n on each of its n+1 pieces (Fractions)."""
    pieces = []
    for i in range(n + 1):
        poly = [Fraction(0)] * (n + 1)
        for k in range(i + 1):
            sign = -1 if k % 2 else 1
            scale = Fraction(sign * comb(n + 1, k), factorial(n))
            shift = i - k
            # (xi + shift)^n expanded in powers of xi
            for p in range(n + 1):
                poly[p] += scale * comb(n, p) * Fraction(shift) ** (n - p)
        pieces.append(poly)
    return pieces


def bspline(n):
    """Centered B-spline of degree ``n`` as a :class:`PiecewisePoly`."""
    if n < 0:
        raise ValueError("degree must be non-negative")
    coefs = np.array([[float(c) for c in p] for p in _exact_pieces(n)])
    return PiecewisePoly(-(n + 1) / 2, coefs)


def support_radius(n):
    return (n + 1) / 2


@lru_cache(maxsize=None)
def _exact_moments(n, kmax):
    box = [Fraction(1, 2**k * (k + 1)) if k % 2 == 0 else Fraction(0) for k in range(kmax + 1)]
    mom = list(box)
    for _ in range(n):
        mom = [sum(comb(k, i) * mom[i] * box[k - i] for i in range(k + 1)) for k in range(kmax + 1)]
    return tuple(mom)


def bspline_moments(n, kmax):
    """Moments ``int x^k beta_n(x) dx`` for ``k = 0..kmax`` (odd ones vanish)."""
    return np.array([float(m) for m in _exact_moments(n, kmax)])


def _series_terms(n, q_min):
    """Number of even-moment terms needed for 1e-17 relative accuracy at |q| >= q_min."""
    ratio = (support_radius(n) / q_min) ** 2
    return int(np.ceil(np.log(1e-17) / np.log(ratio))) + 2


def _closed_form(n, q, order):
    """-(1/pi) Delta^{n+1}[x^p ln|x| / p!], p = n-1-order, in extended precision."""
    p = n - 1 - order
    x = np.asarray(q, dtype=np.longdouble)
    half = np.longdouble(n + 1) / 2
    acc = np.zeros_like(x)
    inv_pfact = np.longdouble(1) / np.longdouble(factorial(p))
    for k in range(n + 2):
        z = x + half - k
        az = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.log(az) * inv_pfact
            if p > 0:
                term = np.where(az == 0, 0, term * z**p)
        acc += (-1) ** k * comb(n + 1, k) * term
    return np.asarray(-acc / np.pi, dtype=float)


def _asymptotic(n, q, order, nterms):
    """Far-field moment series (1/pi) sum_k (k+1) M_k q^{-(k+2)}, differentiated ``order`` times."""
    q = np.asarray(q, dtype=float)
    mom = bspline_moments(n, 2 * nterms)
    out = np.zeros_like(q)
    inv = 1.0 / q
    for i in range(nterms - 1, -1, -1):
        k = 2 * i
        power = k + 2
        coef = (k + 1) * mom[k]
        for o in range(order):
            coef *= -(power + o)
        out = out + coef * inv ** (power + order)
    return out / np.pi


def hilbert_dbspline(n, q, order=0):
    """Evaluate ``d^order/dq^order`` of the filtered kernel (H beta_n')(q).

    The Hilbert transform follows the inversion-formula convention
    ``(H g)(s) = (1/pi) p.v. int g(r) / (r - s) dr``.  Inside ``|q| < L + 2``
    (``L`` the support radius) the exact finite-difference closed form is used,
    outside the convergent far-field moment series.
    """
    if n < 1:
        raise ValueError("filtered kernel needs degree >= 1")
    if order > n - 1:
        raise ValueError("derivative order exceeds the kernel smoothness")
    q = np.asarray(q, dtype=float)
    q_switch = support_radius(n) + 2.0
    far = np.abs(q) >= q_switch
    out = np.empty_like(q)
    if np.any(~far):
        out[~far] = _closed_form(n, q[~far], order)
    if np.any(far):
        out[far] = _asymptotic(n, q[far], order, _series_terms(n, q_switch))
    return out if out.ndim else float(out)


def tail_coefficients(n, nterms=4):
    """Coefficients c_k of the far-field expansion sum c_k q^{-(2k+2)} of H beta_n'."""
    mom = bspline_moments(n, 2 * nterms)
    return np.array([(2 * i + 1) * mom[2 * i] / np.pi for i in range(nterms)])
