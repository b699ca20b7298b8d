"""Discrete Radon data on the lattice ``p_j = p_bar + j eps``, ``alpha_k = alpha_bar + k kappa eps``.

Each sample is the aperture-mollified line integral

    v[k, j] = (1/eps) iint w((p_j - alpha_k . y) / eps) f(y) dy.

In perturbation mode ``f`` is the strip function and the double integral is
taken in curve coordinates: the inner ``t``-integral of
``w(z0 + t cos(u - alpha)/eps) (R - t)`` has a closed form in terms of the
antiderivatives of ``w`` and ``z w``, and the outer ``u``-integral uses the
strip Gauss-Legendre nodes.  Full mode adds the base disk, whose mollified
chord lengths are integrated piecewise with a cosine substitution that
absorbs the square-root endpoint behavior.
"""

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _nb
from .errors import CacheIntegrityError, GridCoverageError
from .phantom import strip_nodes

MODES = ("perturbation", "full")
_SMAGIC = b"RESINO01"
_SHEAD = struct.Struct("<8s4d5q")


@dataclass(frozen=True)
class SinogramGrid:
    eps: float
    kappa: float
    p_bar: float
    alpha_bar: float
    k_lo: int
    k_hi: int
    j_lo: int
    j_hi: int

    @property
    def dp(self):
        return self.eps

    @property
    def dalpha(self):
        return self.kappa * self.eps

    @property
    def nk(self):
        return self.k_hi - self.k_lo + 1

    @property
    def nj(self):
        return self.j_hi - self.j_lo + 1

    def alphas(self):
        return self.alpha_bar + np.arange(self.k_lo, self.k_hi + 1) * self.dalpha

    def offsets(self):
        return self.p_bar + np.arange(self.j_lo, self.j_hi + 1) * self.dp


@dataclass(eq=False)
class Sinogram:
    grid: SinogramGrid
    values: np.ndarray
    row_lo: np.ndarray  # structural support per row, indices into the j axis
    row_hi: np.ndarray
    mode: str = "perturbation"
    provenance: dict = field(default_factory=dict)

    def __add__(self, other):
        if self.grid != other.grid:
            raise ValueError("sinograms live on different grids")
        lo = np.minimum(self.row_lo, other.row_lo)
        hi = np.maximum(self.row_hi, other.row_hi)
        return Sinogram(self.grid, self.values + other.values, lo, hi, "sum", {})


def default_offsets():
    """Irrational-looking lattice offsets that avoid alignment with the phantom."""
    return 1e-3 / math.sqrt(2), 1e-3 * math.sqrt(3)


def _row_ranges(phantom, alphas, eps, mode, L):
    """Closed interval of offsets p whose mollified lines can meet the support, per angle."""
    curve = phantom.curve
    c, R, a = curve.center, curve.radius, curve.arc_halfwidth
    ac = np.cos(alphas) * c[0] + np.sin(alphas) * c[1]
    pad = (L + 1) * eps
    if mode == "full":
        return ac - R - pad, ac + R + pad
    S = eps * phantom.profile.sup_bound
    # cos(u - alpha) is unimodal on the arc: minimum at an endpoint, maximum
    # at u = alpha when alpha lies on the arc
    ends = np.stack([np.cos(-a - alphas), np.cos(a - alphas)])
    lo_c = ends.min(axis=0)
    hi_c = np.where(np.abs(alphas) <= a, 1.0, ends.max(axis=0))
    rho_lo, rho_hi = R - S, R + S
    smin = ac + np.minimum(rho_lo * lo_c, rho_hi * lo_c)
    smax = ac + np.maximum(rho_lo * hi_c, rho_hi * hi_c)
    return smin - pad, smax + pad


def make_grid(phantom, eps, kappa, aperture, p_bar=None, alpha_bar=None, mode="perturbation",
              j_range=None):
    """Sampling lattice covering the phantom's support (angles with ``|alpha_k| <= pi/2``)."""
    if eps <= 0 or kappa <= 0:
        raise ValueError("eps and kappa must be positive")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    pb, ab = default_offsets()
    p_bar = pb if p_bar is None else float(p_bar)
    alpha_bar = ab if alpha_bar is None else float(alpha_bar)
    da = kappa * eps
    k_lo = math.ceil((-math.pi / 2 - alpha_bar) / da)
    k_hi = math.floor((math.pi / 2 - alpha_bar) / da)
    alphas = alpha_bar + np.arange(k_lo, k_hi + 1) * da
    lo, hi = _row_ranges(phantom, alphas, eps, mode, aperture.support_radius)
    need_lo = math.floor((lo.min() - p_bar) / eps)
    need_hi = math.ceil((hi.max() - p_bar) / eps)
    if j_range is None:
        j_lo, j_hi = need_lo, need_hi
    else:
        j_lo, j_hi = int(j_range[0]), int(j_range[1])
        if j_lo > need_lo or j_hi < need_hi:
            raise GridCoverageError(f"j_range [{j_lo}, {j_hi}] misses the required [{need_lo}, {need_hi}]")
    return SinogramGrid(float(eps), float(kappa), p_bar, alpha_bar, k_lo, k_hi, j_lo, j_hi)


@nb.njit(cache=True)
def _sample_strip(alphas, pbar, eps, j_lo, nj, u, wu, H, cx, cy, R, L,
                  w_start, w_coefs, W0_coefs, W1_coefs, W1_right, tn, tw, values, row_lo, row_hi):
    for k in range(alphas.shape[0]):
        ca = math.cos(alphas[k])
        sa = math.sin(alphas[k])
        ac = ca * cx + sa * cy
        lo = nj
        hi = -1
        for i in range(u.shape[0]):
            h = H[i]
            if h == 0.0:
                continue
            cu = math.cos(u[i] - alphas[k])
            d = h * cu / eps
            off = (pbar - ac - R * cu) / eps
            jmin = int(math.ceil(-L - max(d, 0.0) - off))
            jmax = int(math.floor(L - min(d, 0.0) - off))
            for j in range(jmin, jmax + 1):
                jj = j - j_lo
                if jj < 0 or jj >= nj:
                    continue
                z0 = off + j
                if abs(d) >= 0.05:
                    z1 = z0 + d
                    r = eps / cu
                    dW0 = (_nb.pp_eval(z1, w_start, W0_coefs, 0.0, 1.0)
                           - _nb.pp_eval(z0, w_start, W0_coefs, 0.0, 1.0))
                    dW1 = (_nb.pp_eval(z1, w_start, W1_coefs, 0.0, W1_right)
                           - _nb.pp_eval(z0, w_start, W1_coefs, 0.0, W1_right))
                    val = r * ((R + z0 * r) * dW0 - r * dW1)
                else:
                    val = 0.0
                    for g in range(tn.shape[0]):
                        t = 0.5 * h * (1.0 + tn[g])
                        val += tw[g] * _nb.pp_eval(z0 + t * cu / eps, w_start, w_coefs, 0.0, 0.0) * (R - t)
                    val *= 0.5 * h
                values[k, jj] += wu[i] * val
                if jj < lo:
                    lo = jj
                if jj > hi:
                    hi = jj
        if hi >= lo:
            row_lo[k] = min(row_lo[k], lo)
            row_hi[k] = max(row_hi[k], hi)


@nb.njit(cache=True)
def _sample_disk(alphas, pbar, eps, j_lo, nj, cx, cy, R, L, w_start, w_coefs, th, thw,
                 values, row_lo, row_hi):
    npieces = w_coefs.shape[0]
    for k in range(alphas.shape[0]):
        ac = math.cos(alphas[k]) * cx + math.sin(alphas[k]) * cy
        jmin = int(math.ceil((ac - R - L * eps - pbar) / eps))
        jmax = int(math.floor((ac + R + L * eps - pbar) / eps))
        for j in range(jmin, jmax + 1):
            jj = j - j_lo
            if jj < 0 or jj >= nj:
                continue
            sig = pbar + j * eps - ac
            zlo = (sig - R) / eps
            zhi = (sig + R) / eps
            acc = 0.0
            for piece in range(npieces):
                za = max(w_start + piece, zlo)
                zb = min(w_start + piece + 1.0, zhi)
                if zb <= za:
                    continue
                half = 0.5 * (zb - za)
                mid = 0.5 * (zb + za)
                part = 0.0
                for g in range(th.shape[0]):
                    c = math.cos(th[g])
                    z = mid - half * c
                    s = sig - eps * z
                    rad = R * R - s * s
                    if rad <= 0.0:
                        continue
                    part += thw[g] * math.sin(th[g]) * _nb.pp_eval(z, w_start, w_coefs, 0.0, 0.0) * 2.0 * math.sqrt(rad)
                acc += half * part
            values[k, jj] += acc
            row_lo[k] = min(row_lo[k], jj)
            row_hi[k] = max(row_hi[k], jj)


def _provenance(phantom, grid, aperture, mode):
    desc = {
        "center": list(phantom.curve.center),
        "radius": phantom.curve.radius,
        "arc_halfwidth": phantom.curve.arc_halfwidth,
        "jump": phantom.jump,
        "profile": phantom.profile.to_config(),
        "aperture_degree": aperture.degree,
        "mode": mode,
        "grid": [grid.eps, grid.kappa, grid.p_bar, grid.alpha_bar, grid.k_lo, grid.k_hi, grid.j_lo, grid.j_hi],
    }
    text = json.dumps(desc, sort_keys=True)
    return {"phantom": desc, "hash": hashlib.sha256(text.encode()).hexdigest()}


def sample_data(phantom, grid, aperture, mode="perturbation", u_panel=None):
    """Sample the mollified Radon data of the phantom on ``grid``."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    eps = grid.eps
    L = aperture.support_radius
    alphas = grid.alphas()
    lo, hi = _row_ranges(phantom, alphas, eps, mode, L)
    need_lo = math.floor((lo.min() - grid.p_bar) / eps)
    need_hi = math.ceil((hi.max() - grid.p_bar) / eps)
    if grid.j_lo > need_lo or grid.j_hi < need_hi:
        raise GridCoverageError(f"grid j-range [{grid.j_lo}, {grid.j_hi}] misses the required "
                                f"[{need_lo}, {need_hi}]")
    values = np.zeros((grid.nk, grid.nj))
    row_lo = np.full(grid.nk, grid.nj, dtype=np.int64)
    row_hi = np.full(grid.nk, -1, dtype=np.int64)
    c = phantom.curve.center
    R = phantom.curve.radius
    w = aperture.pp
    if phantom.profile.sup_bound > 0:
        u, wu, H = strip_nodes(phantom, eps, panel=u_panel)
        W0 = w.antiderivative()
        W1 = w.times_x().antiderivative()
        tn, tw = np.polynomial.legendre.leggauss(8)
        _sample_strip(alphas, grid.p_bar, eps, grid.j_lo, grid.nj, u, wu * phantom.jump / eps, H,
                      c[0], c[1], R, L, w.start, w.coefs, W0.coefs, W1.coefs, W1.right, tn, tw,
                      values, row_lo, row_hi)
    if mode == "full":
        x, wt = np.polynomial.legendre.leggauss(16)
        th = 0.5 * np.pi * (x + 1)
        thw = 0.5 * np.pi * wt
        disk = np.zeros_like(values)
        _sample_disk(alphas, grid.p_bar, eps, grid.j_lo, grid.nj, c[0], c[1], R, L, w.start, w.coefs,
                     th, thw, disk, row_lo, row_hi)
        values += phantom.jump * disk
    return Sinogram(grid, values, row_lo, row_hi, mode, _provenance(phantom, grid, aperture, mode))


def data_row_support(sino, k, tol=1e-12):
    """Smallest ``(j_first, j_last)`` outside which ``|values[k]| < tol``; ``None`` if empty.

    ``k`` is the angle index of the lattice (``k_lo <= k <= k_hi``).
    """
    g = sino.grid
    if not g.k_lo <= k <= g.k_hi:
        raise IndexError("k outside the grid")
    row = sino.values[k - g.k_lo]
    idx = np.nonzero(np.abs(row) >= tol)[0]
    if idx.size == 0:
        return None
    return int(idx[0] + g.j_lo), int(idx[-1] + g.j_lo)


# -- cache IO --------------------------------------------------------------------

def write_sinogram(path, sino):
    """Write the binary cache and its sidecar manifest ``path + '.json'``.

    Little-endian layout: magic ``RESINO01``; float64 eps, kappa, p_bar,
    alpha_bar; int64 k_lo, nk, j_lo, nj, mode (0 perturbation, 1 full); then
    int64 row_lo[nk], int64 row_hi[nk] and float64 values[nk, nj] row-major.
    """
    g = sino.grid
    mode_id = MODES.index(sino.mode) if sino.mode in MODES else 2
    head = _SHEAD.pack(_SMAGIC, g.eps, g.kappa, g.p_bar, g.alpha_bar, g.k_lo, g.nk, g.j_lo, g.nj, mode_id)
    blob = (head + sino.row_lo.astype("<i8").tobytes() + sino.row_hi.astype("<i8").tobytes()
            + np.ascontiguousarray(sino.values).astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(blob)
    digest = hashlib.sha256(blob).hexdigest()
    manifest = {
        "format": "RESINO01",
        "sha256": digest,
        "bytes": len(blob),
        "exact_zero": bool(not np.any(sino.values)),
        "provenance": sino.provenance,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return digest


def read_sinogram(path, verify=True):
    """Read a cache written by :func:`write_sinogram`, verifying the manifest checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if verify:
        try:
            with open(str(path) + ".json") as fh:
                manifest = json.load(fh)
        except FileNotFoundError as exc:
            raise CacheIntegrityError(f"missing manifest for {path}") from exc
        if hashlib.sha256(blob).hexdigest() != manifest.get("sha256"):
            raise CacheIntegrityError(f"checksum mismatch for {path}")
        prov = manifest.get("provenance", {})
    else:
        prov = {}
    if len(blob) < _SHEAD.size or blob[:8] != _SMAGIC:
        raise CacheIntegrityError(f"{path} is not a sinogram cache")
    _, eps, kappa, p_bar, alpha_bar, k_lo, nk, j_lo, nj, mode_id = _SHEAD.unpack_from(blob)
    off = _SHEAD.size
    need = off + 16 * nk + 8 * nk * nj
    if len(blob) != need:
        raise CacheIntegrityError(f"{path} has {len(blob)} bytes, expected {need}")
    row_lo = np.frombuffer(blob, "<i8", nk, off).astype(np.int64)
    row_hi = np.frombuffer(blob, "<i8", nk, off + 8 * nk).astype(np.int64)
    values = np.frombuffer(blob, "<f8", nk * nj, off + 16 * nk).reshape(nk, nj).astype(float)
    grid = SinogramGrid(eps, kappa, p_bar, alpha_bar, k_lo, k_lo + nk - 1, j_lo, j_lo + nj - 1)
    mode = MODES[mode_id] if mode_id < len(MODES) else "sum"
    return Sinogram(grid, values, row_lo, row_hi, mode, prov)
