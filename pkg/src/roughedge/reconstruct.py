"""Local reconstruction from discrete data, DTB comparison and epsilon sweeps.

The reconstruction at a point ``x`` is

    f_rec(x) = -dalpha/(2 pi eps) sum_k sum_j Psi((alpha_k . x - p_j)/eps) v[k, j].

Rows are summed over their full structural support (data vanish exactly
outside it), so no tail truncation is involved.  Each row and the row total
use Neumaier compensated accumulation in a fixed order, which makes results
independent of thread scheduling.
"""

import math
import time
from dataclasses import dataclass, field as dc_field

import numba as nb
import numpy as np

from . import _nb
from .kernels import dtb_predict
from .sinogram import make_grid, sample_data


@nb.njit(cache=True, parallel=True)
def _recon_points(px, py, ca, sa, values, row_lo, row_hi, j_lo, pbar, eps, dalpha,
                  pv, pd, pstep, pq, ptail):
    npts = px.shape[0]
    out = np.empty(npts)
    for p in nb.prange(npts):
        tot = 0.0
        tcomp = 0.0
        for k in range(ca.shape[0]):
            lo = row_lo[k]
            hi = row_hi[k]
            if hi < lo:
                continue
            q0 = (ca[k] * px[p] + sa[k] * py[p] - pbar) / eps
            s = 0.0
            c = 0.0
            for jj in range(lo, hi + 1):
                term = _nb.psi_eval(q0 - (j_lo + jj), pv, pd, pstep, pq, ptail) * values[k, jj]
                t = s + term
                if abs(s) >= abs(term):
                    c += (s - t) + term
                else:
                    c += (term - t) + s
                s = t
            row = s + c
            t = tot + row
            if abs(tot) >= abs(row):
                tcomp += (tot - t) + row
            else:
                tcomp += (row - t) + tot
            tot = t
        out[p] = -dalpha / (2.0 * math.pi * eps) * (tot + tcomp)
    return out


def reconstruct_points(sino, ks, points):
    """f_rec at an ``(n, 2)`` array of physical points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = sino.grid
    al = g.alphas()
    return _recon_points(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
                         np.cos(al), np.sin(al), np.ascontiguousarray(sino.values),
                         sino.row_lo, sino.row_hi, g.j_lo, g.p_bar, g.eps, g.dalpha,
                         *ks.filtered.args)


def reconstruct_at(sino, ks, x):
    return float(reconstruct_points(sino, ks, [x])[0])


def reconstruct_direct(sino, ks, x, near=3, order=12):
    """Independent evaluation of the inversion formula by p-quadrature.

    Interpolates each data row with ``phi``, differentiates, and evaluates
    ``(1/(2 pi^2)) dalpha sum_k p.v. int g_k'(p) / (alpha_k . x - p) dp``
    piece by piece on the knot intervals of the interpolant.  Pieces within
    ``near`` knot intervals of the singularity use the exact
    subtraction-plus-logarithm form, the others plain Gauss-Legendre.
    No tabulated kernel is involved.
    """
    g = sino.grid
    eps = g.eps
    n = ks.interp.degree
    dphi = ks.interp.pp.derivative()
    L = ks.interp.support_radius
    knot_off = (-L) % 1.0
    xg, wg = np.polynomial.legendre.leggauss(order)
    xs, ws = np.polynomial.legendre.leggauss(max(4, n))
    total = []
    alphas = g.alphas()
    for k in range(g.nk):
        lo, hi = sino.row_lo[k], sino.row_hi[k]
        if hi < lo:
            continue
        v = sino.values[k, lo:hi + 1]
        jlo = g.j_lo + lo
        s = (math.cos(alphas[k]) * x[0] + math.sin(alphas[k]) * x[1] - g.p_bar) / eps
        # knot intervals [m + knot_off, m + 1 + knot_off] in units of eps from p_bar
        m_lo = math.floor(jlo - L - knot_off)
        m_hi = math.ceil(jlo + (hi - lo) + L - knot_off)
        m_lo = min(m_lo, math.floor(s - knot_off) - near)
        m_hi = max(m_hi, math.floor(s - knot_off) + near)
        ms = np.arange(m_lo, m_hi + 1)
        a = ms + knot_off
        js = jlo + np.arange(v.size)

        def gprime(pnodes):
            # g_k'(p) in units where p is measured in eps from p_bar: (1/eps) sum_j v_j phi'(p - j)
            acc = np.zeros_like(pnodes)
            for jv, vv in zip(js, v):
                acc += vv * dphi(pnodes - jv)
            return acc / eps

        dist = np.abs(a + 0.5 - s)
        far = dist > near
        row = 0.0
        # far pieces: integrand G(p)/(s - p) is smooth
        pf = (a[far][:, None] + 0.5 * (1 + xg)[None, :])
        Gf = gprime(pf.ravel()).reshape(pf.shape)
        row += float(np.sum(0.5 * wg * Gf / (s - pf)))
        # near pieces: p.v. int P/(s-p) = -[int (P(p)-P(s))/(p-s) dp + P(s) ln|(b-s)/(a-s)|]
        for ai in a[~far]:
            bi = ai + 1.0
            mid = ai + 0.5
            # local polynomial of the piece, evaluated at s by exact extrapolation
            pn = mid + 0.5 * xs
            Gn = gprime(pn)
            coef = np.polynomial.polynomial.polyfit(pn - mid, Gn, len(xs) - 1)
            Ps = np.polynomial.polynomial.polyval(s - mid, coef)
            diff = (np.polynomial.polynomial.polyval(pn - mid, coef) - Ps) / (pn - s)
            part = float(np.sum(0.5 * ws * diff)) + Ps * math.log(abs((bi - s) / (ai - s)))
            row -= part
        # dp = eps dpn and 1/(s - p) = 1/(eps (s - pn)): the eps factors cancel
        total.append(row)
    return g.dalpha / (2 * math.pi**2) * math.fsum(total)


# -- patches and remainder fields -------------------------------------------------

@dataclass(frozen=True)
class LocalPatch:
    x0: tuple
    eps: float
    box: float = 4.0
    step: float = 0.25

    def grid(self):
        n = int(round(2 * self.box / self.step))
        ax = -self.box + np.arange(n + 1) * self.step
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def points(self):
        xc = self.grid()
        return np.stack([self.x0[0] + self.eps * xc[:, 0], self.x0[1] + self.eps * xc[:, 1]], axis=1)


@dataclass(eq=False)
class RemainderField:
    eps: float
    xcheck: np.ndarray
    f_rec: np.ndarray
    dtb: np.ndarray
    remainder: np.ndarray
    sup_norm: float


def remainder_field(phantom, sino, ks, patch):
    """f_rec and the DTB prediction on the patch, and their difference."""
    if abs(sino.grid.eps - patch.eps) > 1e-15 * patch.eps:
        raise ValueError("sinogram and patch use different eps")
    xc = patch.grid()
    rec = reconstruct_points(sino, ks, patch.points())
    dtb = dtb_predict(ks, phantom, patch.x0, xc, patch.eps)
    rem = rec - dtb
    return RemainderField(patch.eps, xc, rec, dtb, rem, float(np.max(np.abs(rem))))


def scaling_ratio(sup_norm, eps):
    return sup_norm / (math.sqrt(eps) * math.log(1 / eps))


def loglog_slope(eps_list, values):
    """Least-squares slope of log(values) against log(eps); ``None`` if any value is zero."""
    e = np.asarray(eps_list, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return None
    return float(np.polyfit(np.log(e), np.log(v), 1)[0])


@dataclass(eq=False)
class SweepRecord:
    eps: float
    sup_norm: float
    ratio: float
    slope_so_far: object
    dtb_max: float
    rec_max: float
    seconds: float
    field: RemainderField = None
    diagnostics: dict = dc_field(default_factory=dict)


@dataclass(eq=False)
class SweepReport:
    records: list
    slope: object
    ratio_spread: object
    point: object = None
    config: dict = dc_field(default_factory=dict)
    version: str = ""

    @property
    def exact_zero(self):
        return all(r.sup_norm == 0.0 for r in self.records)


def default_eps_list(eps0=2.0**-5, count=6):
    return [eps0 * 2.0**-i for i in range(count)]


def epsilon_sweep(phantom, ks, point, eps_list=None, box=4.0, step=0.25, mode="perturbation",
                  p_bar=None, alpha_bar=None, diagnostics=None, keep_fields=True, progress=None):
    """Run the remainder measurement over a decreasing list of eps.

    ``point`` is an :class:`EvalPoint`; ``diagnostics`` optionally maps each
    eps to extra per-eps records (called as ``diagnostics(eps, sino)``).
    """
    eps_list = default_eps_list() if eps_list is None else [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    records = []
    for eps in eps_list:
        t0 = time.perf_counter()
        grid = make_grid(phantom, eps, point.kappa, ks.aperture, p_bar=p_bar, alpha_bar=alpha_bar, mode=mode)
        sino = sample_data(phantom, grid, ks.aperture, mode=mode)
        fld = remainder_field(phantom, sino, ks, LocalPatch(point.x0, eps, box, step))
        extra = diagnostics(eps, sino) if diagnostics is not None else {}
        sups = [r.sup_norm for r in records] + [fld.sup_norm]
        eps_sofar = [r.eps for r in records] + [eps]
        rec = SweepRecord(eps, fld.sup_norm, scaling_ratio(fld.sup_norm, eps),
                          loglog_slope(eps_sofar, sups) if len(sups) > 1 else None,
                          float(np.max(np.abs(fld.dtb))), float(np.max(np.abs(fld.f_rec))),
                          time.perf_counter() - t0, fld if keep_fields else None, extra)
        records.append(rec)
        if progress is not None:
            progress(rec)
    sups = [r.sup_norm for r in records]
    ratios = [r.ratio for r in records]
    slope = loglog_slope(eps_list, sups) if len(records) > 1 else None
    spread = (max(ratios) / min(ratios)) if min(ratios) > 0 else None
    return SweepReport(records, slope, spread, point)
