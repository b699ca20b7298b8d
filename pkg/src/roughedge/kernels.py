"""Aperture, interpolation kernel, filtered kernel and the DTB kernel.

Conventions
-----------
* ``w`` (aperture) and ``phi`` (interpolation kernel) are centered
  B-splines of degrees ``d`` and ``n``.
* ``Psi = H phi'`` with ``(H g)(s) = (1/pi) p.v. int g(r) / (r - s) dr``.
  This is the sign under which ``-dalpha/(2 pi eps) sum Psi(.) data``
  reconstructs a positive bump with a positive sign.  ``Psi`` is even.
* ``Psi * w = H (phi * w)'`` is the filtered kernel of the B-spline of
  degree ``N = n + d + 1``, which gives the DTB kernel

      k(r) = -(1/pi) int_0^{pi/2} Psi_N(r cos a) da,   k(r) = 0 for r >= (N+1)/2.

* ``psi(q, t) = sum_j Psi(q - j) w(j - q - t)`` is 1-periodic in ``q`` and
  ``psi_m(t) = int_0^1 psi(q, t) e(m q) dq`` with ``e(x) = exp(2 pi i x)``.
"""

import hashlib
import math
import struct
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.special import roots_legendre

from . import _nb
from .bspline import (_series_terms, bspline, hilbert_dbspline, support_radius,
                      tail_coefficients)
from .errors import AccuracyFailure, ConfigError


@dataclass(frozen=True)
class Aperture:
    degree: int

    @property
    def support_radius(self):
        return support_radius(self.degree)

    @property
    def pp(self):
        return bspline(self.degree)

    def __call__(self, p):
        out = self.pp(p)
        return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class InterpKernel:
    degree: int

    @property
    def support_radius(self):
        return support_radius(self.degree)

    @property
    def pp(self):
        return bspline(self.degree)

    def __call__(self, u):
        out = self.pp(u)
        return out if np.ndim(out) else float(out)


def eval_w(ap, p):
    return ap(p)


def eval_phi(ik, u):
    return ik(u)


def exactness_sums(ik, u):
    """``(sum_j phi(u - j), sum_j j phi(u - j))`` for an array of ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    L = ik.support_radius
    j = np.arange(math.floor(u.min() - L) - 1, math.ceil(u.max() + L) + 2)
    vals = ik.pp(u[:, None] - j[None, :])
    s0 = np.array([math.fsum(row) for row in vals])
    s1 = np.array([math.fsum(row) for row in vals * j[None, :]])
    return s0, s1


def _hermite_np(vals, ders, step, x):
    s = x / step
    i = np.minimum(s.astype(np.int64), vals.shape[0] - 2)
    s = s - i
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * vals[i] + (s3 - 2 * s2 + s) * ders[i] * step
            + (-2 * s3 + 3 * s2) * vals[i + 1] + (s3 - s2) * ders[i + 1] * step)


# -- filtered kernel --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilteredKernel:
    """Tabulated ``Psi`` on ``0 <= q <= q_tab`` (even extension) plus far-field series."""

    degree: int
    q_tab: float
    step: float
    values: np.ndarray
    derivs: np.ndarray
    tail: np.ndarray
    c_tail: float
    certificate: float

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = _nb.psi_array(np.ascontiguousarray(q.ravel()), self.values, self.derivs,
                            self.step, self.q_tab, self.tail).reshape(q.shape)
        return out if out.ndim else float(out)

    @property
    def args(self):
        return self.values, self.derivs, self.step, self.q_tab, self.tail


def build_filtered(ik, Q_tab=64.0, grid_step=1 / 256, tol=1e-8):
    """Tabulate ``Psi = H phi'`` from its exact piecewise closed form.

    The table stores values and first derivatives for cubic Hermite
    interpolation; the certificate is the worst relative deviation at cell
    midpoints from the closed form (a second, twice finer resolution),
    measured against the envelope ``max(|Psi|, 1/(pi (1 + q^2)))``.
    """
    n = ik.degree
    if n < 3:
        raise ConfigError("interpolation degree must be >= 3 for a C^1 filtered table", "kernel.interp_degree")
    if Q_tab < 4 * ik.support_radius:
        raise ValueError("Q_tab must be at least four support radii")
    if grid_step > 1 / 64:
        raise ValueError("grid_step must not exceed 1/64")
    nq = int(round(Q_tab / grid_step))
    if abs(nq * grid_step - Q_tab) > 1e-12 * Q_tab:
        raise ValueError("Q_tab must be a multiple of grid_step")
    grid = np.arange(nq + 1) * grid_step
    vals = np.ascontiguousarray(hilbert_dbspline(n, grid))
    ders = np.ascontiguousarray(hilbert_dbspline(n, grid, 1))
    mid = grid[:-1] + grid_step / 2
    exact = hilbert_dbspline(n, mid)
    approx = _hermite_np(vals, ders, grid_step, mid)
    env = np.maximum(np.abs(exact), 1 / (np.pi * (1 + mid**2)))
    cert = float(np.max(np.abs(approx - exact) / env))
    if cert > tol:
        raise AccuracyFailure(f"filtered-kernel table error {cert:.3e} exceeds {tol:.1e}")
    tail = tail_coefficients(n, _series_terms(n, Q_tab))
    sel = grid >= Q_tab / 2
    design = np.stack([np.ones(sel.sum()), grid[sel] ** -2], axis=1)
    coef, *_ = np.linalg.lstsq(design, grid[sel] ** 2 * vals[sel], rcond=None)
    return FilteredKernel(n, float(Q_tab), float(grid_step), vals, ders, tail,
                          float(coef[0]), cert)


def tail_check(fk, npts=2001):
    """sup over |q| in [Q, 2Q] of |q^2 Psi(q) - c_tail| / |c_tail|, against the exact kernel."""
    q = np.linspace(fk.q_tab, 2 * fk.q_tab, npts)
    return float(np.max(np.abs(q**2 * hilbert_dbspline(fk.degree, q) - fk.c_tail)) / abs(fk.c_tail))


# -- DTB kernel --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DTBKernel:
    """Radial profile ``k(r)`` on ``[0, r_max]`` (Hermite table) and its radial moment."""

    degree: int
    r_max: float
    step: float
    values: np.ndarray
    derivs: np.ndarray
    moment: np.ndarray  # G(r_i) = int_0^{r_i} k(s) s ds
    radon_residual: float
    mass: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = _nb.radial_array(np.ascontiguousarray(np.abs(r).ravel()), self.values, self.derivs,
                               self.step, self.r_max).reshape(r.shape)
        return out if out.ndim else float(out)

    @property
    def args(self):
        return self.values, self.derivs, self.step, self.r_max

    def radial_moment(self, r):
        """Odd extension of ``G(r) = int_0^r k(s) s ds``."""
        r = np.asarray(r, dtype=float)
        a = np.minimum(np.abs(r), self.r_max)
        i = np.minimum((a / self.step).astype(np.int64), self.values.shape[0] - 2)
        left = i * self.step
        x, w = roots_legendre(3)
        h = 0.5 * (a - left)
        nodes = left[..., None] + h[..., None] * (1 + x)
        part = np.sum(w * self(nodes) * nodes, axis=-1) * h
        return np.sign(r) * (self.moment[i] + part)


def _gl(order):
    x, w = roots_legendre(order)
    return x, w


def _dtb_profile(N, r, order=16):
    """k(r) and k'(r) by Gauss-Legendre in the angle, split where r cos(a) crosses a knot."""
    L = support_radius(N)
    knots = -L + np.arange(N + 2)
    pos_knots = knots[knots > 0]
    x, w = _gl(order)
    vals = np.empty_like(r)
    ders = np.empty_like(r)
    for i, ri in enumerate(r):
        if ri == 0.0:
            vals[i] = -0.5 * hilbert_dbspline(N, 0.0)
            ders[i] = 0.0
            continue
        cuts = [0.0, math.pi / 2]
        cuts += [math.acos(kn / ri) for kn in pos_knots if kn < ri]
        cuts = np.unique(cuts)
        h = 0.5 * np.diff(cuts)
        m = 0.5 * (cuts[1:] + cuts[:-1])
        ang = (m[:, None] + h[:, None] * x[None, :]).ravel()
        wt = (h[:, None] * w[None, :]).ravel()
        arg = ri * np.cos(ang)
        vals[i] = -np.dot(wt, hilbert_dbspline(N, arg)) / np.pi
        ders[i] = -np.dot(wt, hilbert_dbspline(N, arg, 1) * np.cos(ang)) / np.pi
    return vals, ders


def radon_of_radial(values, derivs, step, r_max, p, order=4):
    """Line integral ``int k(sqrt(p^2 + s^2)) ds`` of the tabulated radial kernel."""
    p = abs(float(p))
    if p >= r_max:
        return 0.0
    grid = np.arange(values.shape[0]) * step
    rk = grid[grid > p]
    edges = np.concatenate([[0.0], np.sqrt(rk**2 - p * p)])
    x, w = _gl(order)
    h = 0.5 * np.diff(edges)
    m = 0.5 * (edges[1:] + edges[:-1])
    s = (m[:, None] + h[:, None] * x[None, :]).ravel()
    wt = (h[:, None] * w[None, :]).ravel()
    rr = np.sqrt(p * p + s * s)
    kv = _nb.radial_array(rr, values, derivs, step, r_max)
    return 2.0 * math.fsum(wt * kv)


def build_dtb_kernel(ks_or_degrees, grid_step=1 / 256, n_lines=20, seed=2024, tol=1e-6):
    """Tabulate the radial DTB kernel and certify Radon consistency.

    ``ks_or_degrees`` is a :class:`KernelSet` or a pair ``(n, d)``.
    """
    if grid_step > 1 / 128:
        raise ValueError("grid_step must not exceed 1/128")
    if isinstance(ks_or_degrees, KernelSet):
        n, d = ks_or_degrees.interp.degree, ks_or_degrees.aperture.degree
    else:
        n, d = ks_or_degrees
    N = n + d + 1
    R_K = support_radius(N)
    nr = int(round(R_K / grid_step))
    r = np.arange(nr + 1) * grid_step
    vals, ders = _dtb_profile(N, r)
    edge = max(abs(vals[-1]), abs(ders[-1]))
    if edge > 1e-9:
        raise AccuracyFailure(f"DTB kernel does not vanish at its support radius ({edge:.2e})")
    vals[-1] = 0.0
    ders[-1] = 0.0
    vals = np.ascontiguousarray(vals)
    ders = np.ascontiguousarray(ders)
    # cumulative radial moment on the grid
    x, w = _gl(3)
    left = r[:-1]
    nodes = left[:, None] + 0.5 * grid_step * (1 + x)[None, :]
    kv = _nb.radial_array(np.ascontiguousarray(nodes.ravel()), vals, ders, grid_step, R_K)
    cell = 0.5 * grid_step * np.sum(w * kv.reshape(nodes.shape) * nodes, axis=1)
    moment = np.concatenate([[0.0], np.cumsum(cell)])
    mass = 2 * math.pi * float(moment[-1])
    rng = np.random.default_rng(seed)
    ps = rng.uniform(-R_K - 0.5, R_K + 0.5, n_lines)
    beta_N = bspline(N)
    resid = max(abs(radon_of_radial(vals, ders, grid_step, R_K, p) - float(beta_N(p))) for p in ps)
    if resid > tol or abs(mass - 1.0) > tol:
        raise AccuracyFailure(f"DTB Radon-consistency residual {resid:.2e}, mass error {abs(mass - 1):.2e}")
    return DTBKernel(N, float(R_K), float(grid_step), vals, ders, moment, float(resid), mass)


# -- periodized kernel and its Fourier coefficients ----------------------------

@nb.njit(cache=True)
def _periodized(tgrid, qgrid, psi_qj, j_lo, w_start, w_coefs, dw_coefs, L):
    nt, nq = tgrid.shape[0], qgrid.shape[0]
    out = np.zeros((nt, nq))
    dout = np.zeros((nt, nq))
    for it in range(nt):
        t = tgrid[it]
        for l in range(nq):
            q = qgrid[l]
            acc = 0.0
            dacc = 0.0
            for j in range(int(math.ceil(q + t - L)), int(math.floor(q + t + L)) + 1):
                z = j - q - t
                P = psi_qj[j - j_lo, l]
                acc += P * _nb.pp_eval(z, w_start, w_coefs, 0.0, 0.0)
                dacc -= P * _nb.pp_eval(z, w_start, dw_coefs, 0.0, 0.0)
            out[it, l] = acc
            dout[it, l] = dacc
    return out, dout


@dataclass(frozen=True, eq=False)
class FourierTable:
    """``psi_m(t)`` and ``d/dt psi_m(t)`` for ``0 <= m <= m_max`` on a uniform t-grid.

    Outside ``|t| <= t_max`` the nonzero modes are negligible (the aperture's
    Fourier transform vanishes to high order at nonzero integers) and
    ``psi_0(t) = Psi_N(t)`` is given by its far-field series ``tail0``.
    """

    t_max: float
    t_step: float
    n_q: int
    coef: np.ndarray
    dcoef: np.ndarray
    tail0: np.ndarray

    @property
    def m_max(self):
        return self.coef.shape[1] - 1

    def __call__(self, m, t):
        t = np.asarray(t, dtype=float)
        am = abs(int(m))
        if am > self.m_max:
            raise ValueError(f"|m| exceeds the tabulated range {self.m_max}")
        inside = np.abs(t) <= self.t_max
        x = np.clip(t, -self.t_max, self.t_max) + self.t_max
        val = _hermite_np(self.coef[:, am], self.dcoef[:, am], self.t_step, x)
        if am == 0:
            far = np.where(inside, 0.0, 1.0)
            tt = np.where(inside, 1.0, np.abs(t))
            series = np.zeros_like(tt)
            for k in range(self.tail0.shape[0] - 1, -1, -1):
                series = series / tt**2 + self.tail0[k]
            val = np.where(far > 0, series / tt**2, val)
        else:
            val = np.where(inside, val, 0.0)
        if m < 0:
            val = np.conj(val)
        return val if val.ndim else complex(val)


def build_fourier_table(filtered, aperture, t_max=72.0, t_step=1 / 32, n_q=1024, m_max=64, chunk=256):
    L = aperture.support_radius
    nt = int(round(2 * t_max / t_step))
    tgrid = -t_max + np.arange(nt + 1) * t_step
    qgrid = np.arange(n_q) / n_q
    j_lo = int(math.floor(-t_max - L)) - 2
    j_hi = int(math.ceil(1 + t_max + L)) + 2
    js = np.arange(j_lo, j_hi + 1)
    psi_qj = filtered((qgrid[None, :] - js[:, None]))
    wpp = aperture.pp
    dwpp = wpp.derivative()
    coef = np.empty((nt + 1, m_max + 1), dtype=complex)
    dcoef = np.empty((nt + 1, m_max + 1), dtype=complex)
    for s in range(0, nt + 1, chunk):
        tg = tgrid[s:s + chunk]
        vals, dvals = _periodized(tg, qgrid, psi_qj, j_lo, wpp.start, wpp.coefs, dwpp.coefs, L)
        coef[s:s + chunk] = np.fft.ifft(vals, axis=1)[:, :m_max + 1]
        dcoef[s:s + chunk] = np.fft.ifft(dvals, axis=1)[:, :m_max + 1]
    N = filtered.degree + aperture.degree + 1
    tail0 = tail_coefficients(N, _series_terms(N, t_max))
    return FourierTable(float(t_max), float(t_step), int(n_q), coef, dcoef, tail0)


# -- kernel set ----------------------------------------------------------------

class KernelSet:
    """Immutable bundle of all kernels derived from one smoothness parameter ``beta``."""

    def __init__(self, beta, aperture, interp, filtered, dtb):
        self.beta = float(beta)
        self.aperture = aperture
        self.interp = interp
        self.filtered = filtered
        self.dtb = dtb
        self._fourier = None

    @property
    def fourier(self):
        if self._fourier is None:
            self._fourier = build_fourier_table(self.filtered, self.aperture)
        return self._fourier

    @property
    def gamma(self):
        return 1.0 / (2.0 * (self.beta - 1.0))

    def rho(self, m):
        return (1.0 + np.abs(m)) ** (-self.beta)

    def describe(self):
        return {
            "beta": self.beta,
            "aperture_degree": self.aperture.degree,
            "interp_degree": self.interp.degree,
            "dtb_degree": self.dtb.degree,
            "q_tab": self.filtered.q_tab,
            "psi_step": self.filtered.step,
            "dtb_step": self.dtb.step,
            "c_tail": self.filtered.c_tail,
            "psi_certificate": self.filtered.certificate,
            "dtb_radon_residual": self.dtb.radon_residual,
            "dtb_mass": self.dtb.mass,
            "gamma": self.gamma,
        }


def default_degrees(beta):
    b = math.ceil(beta)
    return b + 2, b


def check_degrees(beta, aperture_degree=None, interp_degree=None):
    """Resolve and validate ``(d, n)``; errors cite the violated smoothness assumption."""
    if not beta > 0:
        raise ConfigError("beta must be positive", "kernel.beta")
    d_def, n_def = default_degrees(beta)
    d = d_def if aperture_degree is None else int(aperture_degree)
    n = n_def if interp_degree is None else int(interp_degree)
    if d - 1 < math.ceil(beta) + 1:
        raise ConfigError(f"aperture degree {d} gives smoothness C^{d - 1}, but the aperture "
                          f"assumption needs C^(ceil(beta)+1) = C^{math.ceil(beta) + 1}",
                          "kernel.aperture_degree")
    if n + 1 < beta + 1:
        raise ConfigError(f"interpolation degree {n} gives Fourier decay of order {n + 1}, "
                          f"below the required beta+1 = {beta + 1}", "kernel.interp_degree")
    if n < 3:
        raise ConfigError(f"interpolation degree {n} is below 3, the lowest degree whose "
                          "filtered kernel has a continuous derivative", "kernel.interp_degree")
    return d, n


def build_kernels(beta=4.0, aperture_degree=None, interp_degree=None, Q_tab=64.0,
                  psi_step=1 / 256, dtb_step=1 / 256, cache=None):
    """Build (or load from ``cache``) the full kernel set for smoothness ``beta``."""
    d, n = check_degrees(beta, aperture_degree, interp_degree)
    ap, ik = Aperture(d), InterpKernel(n)
    if cache is not None:
        loaded = load_kernel_cache(cache, n, d, Q_tab, psi_step, dtb_step)
        if loaded is not None:
            fk, dtb = loaded
            return KernelSet(beta, ap, ik, fk, dtb)
    fk = build_filtered(ik, Q_tab, psi_step)
    dtb = build_dtb_kernel((n, d), dtb_step)
    if cache is not None:
        save_kernel_cache(cache, fk, dtb, d)
    return KernelSet(beta, ap, ik, fk, dtb)


# -- evaluations ---------------------------------------------------------------

def eval_psi(ks, q, t):
    """Periodized kernel ``psi(q, t) = sum_j Psi(q - j) w(j - q - t)`` (finite sum)."""
    q = float(q)
    t = float(t)
    L = ks.aperture.support_radius
    j = np.arange(math.ceil(q + t - L), math.floor(q + t + L) + 1)
    terms = ks.filtered(q - j) * ks.aperture.pp(j - q - t)
    return math.fsum(terms)


def psi_fourier(ks, m, t, order=24):
    """``psi_m(t) = int Psi(q) w(q + t) e(m q) dq`` by direct whole-line quadrature.

    Uses the exact closed form of ``Psi`` (not the table) on panels split at
    the knots of both factors.
    """
    t = float(t)
    L = ks.aperture.support_radius
    Ln = ks.interp.support_radius
    lo, hi = -t - L, -t + L
    cuts = list(-t - L + np.arange(ks.aperture.degree + 2))
    cuts += [k for k in (-Ln + np.arange(ks.interp.degree + 2)) if lo < k < hi]
    cuts = np.unique(cuts)
    sub = 2 * abs(int(m)) // 3 + 1
    cuts = np.concatenate([np.linspace(a, b, sub + 1)[:-1] for a, b in zip(cuts[:-1], cuts[1:])] + [cuts[-1:]])
    x, w = _gl(order)
    h = 0.5 * np.diff(cuts)
    mid = 0.5 * (cuts[1:] + cuts[:-1])
    q = (mid[:, None] + h[:, None] * x[None, :]).ravel()
    wt = (h[:, None] * w[None, :]).ravel()
    f = hilbert_dbspline(ks.interp.degree, q) * ks.aperture.pp(q + t) * wt
    return complex(math.fsum(f * np.cos(2 * np.pi * m * q)), math.fsum(f * np.sin(2 * np.pi * m * q)))


def decay_constants(ks, ms=None, ts=None):
    """Per-mode constants ``C_m = max_t |psi_m(t)| (1 + |m|)^beta (1 + t^2)``.

    Defaults: ``m = 1..64`` and 161 equispaced ``t`` in ``[-20, 20]``.  The
    decay bound holds with a single constant when ``max C_m / min C_m`` stays
    moderate; returns ``(ms, C)``.
    """
    ms = np.arange(1, 65) if ms is None else np.asarray(ms, dtype=int)
    ts = np.linspace(-20.0, 20.0, 161) if ts is None else np.asarray(ts, dtype=float)
    C = np.empty(ms.size)
    for i, m in enumerate(ms):
        v = np.array([abs(psi_fourier(ks, int(m), t)) for t in ts])
        C[i] = float(np.max(v * (1.0 + abs(m)) ** ks.beta * (1.0 + ts**2)))
    return ms, C


@nb.njit(cache=True)
def _dtb_points(px, py, cu, su, wu, H, cx, cy, R, eps, tn, tw, kv, kd, kstep, kR, jump):
    out = np.zeros(px.shape[0])
    reach = kR * eps
    for p in range(px.shape[0]):
        acc = 0.0
        comp = 0.0
        for i in range(cu.shape[0]):
            h = H[i]
            if h == 0.0:
                continue
            dx = cx + R * cu[i] - px[p]
            dy = cy + R * su[i] - py[p]
            lim = reach + abs(h)
            if dx * dx + dy * dy > lim * lim:
                continue
            inner = 0.0
            for g in range(tn.shape[0]):
                t = 0.5 * h * (1.0 + tn[g])
                rho = R - t
                ex = cx + rho * cu[i] - px[p]
                ey = cy + rho * su[i] - py[p]
                r = math.sqrt(ex * ex + ey * ey) / eps
                inner += tw[g] * _nb.radial_eval(r, kv, kd, kstep, kR) * rho
            s, e = _nb.two_sum(acc, wu[i] * 0.5 * h * inner)
            acc = s
            comp += e
        out[p] = jump * (acc + comp) / (eps * eps)
    return out


def dtb_predict(ks, phantom, x0, xcheck_grid, eps, t_order=8):
    """``(1/eps^2) iint K((x0 + eps*xc - y)/eps) f_eps^p(y) dy`` for each ``xc`` in the grid."""
    from .phantom import strip_nodes

    if eps <= 0:
        raise ValueError("eps must be positive")
    xc = np.atleast_2d(np.asarray(xcheck_grid, dtype=float))
    px = np.ascontiguousarray(x0[0] + eps * xc[:, 0])
    py = np.ascontiguousarray(x0[1] + eps * xc[:, 1])
    if phantom.profile.sup_bound == 0.0:
        return np.zeros(px.shape[0])
    u, wu, H = strip_nodes(phantom, eps)
    tn, tw = _gl(t_order)
    c = phantom.curve.center
    return _dtb_points(px, py, np.cos(u), np.sin(u), wu, H, c[0], c[1], phantom.curve.radius,
                       eps, tn, tw, *ks.dtb.args, phantom.jump)


def dtb_oracle(ks, phantom, x, eps, epsabs=1e-13, epsrel=1e-10):
    """Independent DTB value at the physical point ``x`` via polar lines through ``x``.

    Each line through ``x`` is intersected exactly with the strip, the radial
    factor ``|tau| k(|tau|/eps)`` is integrated in closed form through the
    tabulated radial moment, and the angle integral is done adaptively.
    """
    from scipy.integrate import quad

    from .phantom import line_strip_intervals

    x = (float(x[0]), float(x[1]))
    c = phantom.curve.center

    def along(alpha):
        ca, sa = math.cos(alpha), math.sin(alpha)
        s = ca * x[0] + sa * x[1]
        tau_x = -sa * (x[0] - c[0]) + ca * (x[1] - c[1])
        acc = 0.0
        for t1, t2, sgn in line_strip_intervals(phantom, alpha, s, eps):
            g = ks.dtb.radial_moment(np.array([(t2 - tau_x) / eps, (t1 - tau_x) / eps]))
            acc += sgn * (g[0] - g[1])
        return acc

    val, _ = quad(along, 0.0, math.pi, limit=400, epsabs=epsabs, epsrel=epsrel)
    return phantom.jump * val


# -- binary cache ----------------------------------------------------------------

_KMAGIC = b"REKERN01"
_KHEAD = struct.Struct("<8s3i2q4d")


def save_kernel_cache(path, fk, dtb, aperture_degree):
    """Little-endian layout: header (magic, n, d, N, len_psi, len_dtb, q_tab, psi_step,
    dtb_step, r_max) followed by psi values, psi derivatives, k values, k derivatives,
    tail coefficients count (int64) and the tail coefficients (all float64)."""
    head = _KHEAD.pack(_KMAGIC, fk.degree, aperture_degree, dtb.degree, fk.values.size,
                       dtb.values.size, fk.q_tab, fk.step, dtb.step, dtb.r_max)
    body = b"".join(a.astype("<f8").tobytes() for a in (fk.values, fk.derivs, dtb.values, dtb.derivs))
    tail = struct.pack("<q", fk.tail.size) + fk.tail.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(head + body + tail)
    return hashlib.sha256(head + body + tail).hexdigest()


def load_kernel_cache(path, n, d, Q_tab, psi_step, dtb_step):
    """Load a cache written by :func:`save_kernel_cache`; ``None`` if absent or mismatched."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError:
        return None
    if len(raw) < _KHEAD.size:
        return None
    magic, nn, dd, N, lp, ld, q_tab, pstep, dstep, r_max = _KHEAD.unpack_from(raw)
    if magic != _KMAGIC or (nn, dd) != (n, d) or q_tab != Q_tab or pstep != psi_step or dstep != dtb_step:
        return None
    off = _KHEAD.size
    arrs = []
    for size in (lp, lp, ld, ld):
        arrs.append(np.frombuffer(raw, "<f8", size, off).astype(float))
        off += 8 * size
    (nt,) = struct.unpack_from("<q", raw, off)
    tail = np.frombuffer(raw, "<f8", nt, off + 8).astype(float)
    fk_tmp = build_filtered_from_arrays(n, q_tab, pstep, arrs[0], arrs[1], tail)
    dtb = _dtb_from_arrays(N, r_max, dstep, arrs[2], arrs[3])
    return fk_tmp, dtb


def build_filtered_from_arrays(n, q_tab, step, vals, ders, tail):
    grid = np.arange(vals.size) * step
    sel = grid >= q_tab / 2
    design = np.stack([np.ones(sel.sum()), grid[sel] ** -2], axis=1)
    coef, *_ = np.linalg.lstsq(design, grid[sel] ** 2 * vals[sel], rcond=None)
    mid = grid[:-1] + step / 2
    exact = hilbert_dbspline(n, mid[::97])
    approx = _hermite_np(vals, ders, step, mid[::97])
    cert = float(np.max(np.abs(approx - exact) / np.maximum(np.abs(exact), 1 / (np.pi * (1 + mid[::97] ** 2)))))
    return FilteredKernel(n, q_tab, step, np.ascontiguousarray(vals), np.ascontiguousarray(ders),
                          tail, float(coef[0]), cert)


def _dtb_from_arrays(N, r_max, step, vals, ders):
    vals = np.ascontiguousarray(vals)
    ders = np.ascontiguousarray(ders)
    x, w = _gl(3)
    r = np.arange(vals.size) * step
    nodes = r[:-1, None] + 0.5 * step * (1 + x)[None, :]
    kv = _nb.radial_array(np.ascontiguousarray(nodes.ravel()), vals, ders, step, r_max)
    cell = 0.5 * step * np.sum(w * kv.reshape(nodes.shape) * nodes, axis=1)
    moment = np.concatenate([[0.0], np.cumsum(cell)])
    beta_N = bspline(N)
    resid = max(abs(radon_of_radial(vals, ders, step, r_max, p) - float(beta_N(p)))
                for p in np.linspace(-r_max, r_max, 7))
    return DTBKernel(N, r_max, step, vals, ders, moment, float(resid), 2 * math.pi * float(moment[-1]))
