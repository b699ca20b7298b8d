"""Base curve, rough perturbation strip and evaluation-point selection.

The base curve is a circle ``y(u) = c + R (cos u, sin u)`` whose interior
normal ``-(cos u, sin u)`` points at the center.  A point ``x`` has curve
coordinates ``(u, t)`` with ``x = y(u) + t * normal(u)``, i.e.
``t = R - |x - c|`` and ``u = atan2(x - c)``.

The perturbation lives on the arc ``|u| <= a``:

    f_eps^p(x) = jump * chi(t, H_eps(u)),
    chi(t, r) = 1 if 0 < t <= r, -1 if r <= t < 0, 0 otherwise.

Integrals over the strip are written in curve coordinates with Jacobian
``R - t``; the signed upper limit ``H_eps(u)`` takes care of both signs of
``chi`` at once.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import CoordinateFailure, GenericityFailure
from .perturbation import Kind, PerturbationProfile, eval_Heps, heps_breakpoints

GOLDEN = (1 + math.sqrt(5)) / 2


class CaseLabel(str, enum.Enum):
    A_onS = "A"
    B_tangent = "B"
    C_transverse = "C"

    @classmethod
    def parse(cls, label):
        if isinstance(label, cls):
            return label
        text = str(label).strip()
        for member in cls:
            if text in (member.value, member.name):
                return member
        raise ValueError(f"unknown case label {label!r}")


@dataclass(frozen=True)
class BaseCurve:
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    arc_halfwidth: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0 < self.arc_halfwidth < math.pi / 4:
            raise ValueError("arc_halfwidth must lie in (0, pi/4)")


@dataclass(frozen=True)
class Phantom:
    curve: BaseCurve
    profile: PerturbationProfile
    jump: float = 1.0

    def __post_init__(self):
        if self.jump == 0:
            raise ValueError("jump must be nonzero")


@dataclass(frozen=True)
class EvalPoint:
    x0: tuple
    case_label: CaseLabel
    kappa: float
    genericity: dict = field(default_factory=dict)


def curve_point(curve, u):
    """Point ``y(u)`` and interior unit normal at ``u``."""
    cu, su = math.cos(u), math.sin(u)
    cx, cy = curve.center
    return (cx + curve.radius * cu, cy + curve.radius * su), (-cu, -su)


def curve_tangent(curve, u):
    """Unit tangent ``y'(u)/|y'(u)|``."""
    return (-math.sin(u), math.cos(u))


def curve_coords(curve, x):
    """Curve coordinates ``(u, t)`` of the point ``x``."""
    dx = float(x[0]) - curve.center[0]
    dy = float(x[1]) - curve.center[1]
    rho = math.hypot(dx, dy)
    if rho == 0.0:
        raise CoordinateFailure("curve coordinates are undefined at the center of curvature")
    return math.atan2(dy, dx), curve.radius - rho


def _chi(t, r):
    if 0 < t <= r:
        return 1.0
    if r <= t < 0:
        return -1.0
    return 0.0


def eval_fpe(phantom, x, eps):
    """Value of the perturbation function at ``x``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    u, t = curve_coords(phantom.curve, x)
    if abs(u) > phantom.curve.arc_halfwidth or abs(t) >= phantom.curve.radius / 2:
        return 0.0
    return phantom.jump * _chi(t, eval_Heps(phantom.profile, u, eps))


# -- strip quadrature -----------------------------------------------------

def default_panel(phantom, eps):
    """u-panel width resolving both H_eps (scale sqrt(eps)) and data kernels (scale eps)."""
    width = min(math.sqrt(eps) / 32, eps / (2 * phantom.curve.radius))
    prof = phantom.profile
    if prof.kind is Kind.WEIERSTRASS:
        top = prof.params["b"] ** prof.params["terms"] * math.pi
        width = min(width, math.sqrt(eps) / (2 * top))
    return width


def strip_nodes(phantom, eps, panel=None, order=6, window=None):
    """Gauss-Legendre nodes in ``u`` over the arc, panels aligned with H_eps breakpoints.

    Returns ``(u, weights, H)`` with ``H = H_eps(u)``.
    """
    a = phantom.curve.arc_halfwidth
    lo, hi = -a, a
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    if not lo < hi:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    width = default_panel(phantom, eps) if panel is None else panel
    n = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, n + 1)
    bps = heps_breakpoints(phantom.profile, lo, hi, eps)
    if bps.size:
        edges = np.unique(np.concatenate([edges, bps]))
        keep = np.concatenate([[True], np.diff(edges) > 1e-13 * max(1.0, a)])
        edges = edges[keep]
        edges[-1] = hi
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return u, wt, np.asarray(eval_Heps(phantom.profile, u, eps), dtype=float)


def strip_integral(phantom, eps, g=None, order_t=8):
    """``iint g(y) f_eps^p(y) dy`` by strip quadrature (``g`` vectorized, default 1)."""
    u, wu, H = strip_nodes(phantom, eps)
    xt, wt = np.polynomial.legendre.leggauss(order_t)
    R = phantom.curve.radius
    t = 0.5 * H[:, None] * (1 + xt[None, :])
    jac = 0.5 * H[:, None] * wt[None, :] * (R - t)
    if g is None:
        vals = np.ones_like(t)
    else:
        rho = R - t
        px = phantom.curve.center[0] + rho * np.cos(u)[:, None]
        py = phantom.curve.center[1] + rho * np.sin(u)[:, None]
        vals = g(px, py)
    return phantom.jump * float(np.sum(wu[:, None] * jac * vals))


# -- exact line integrals -------------------------------------------------

def _phi_windows(sigma, R, S):
    """Angle windows (phi = u - alpha) where the line can meet the strip."""
    lo = abs(sigma) / (R + S)
    if lo >= 1.0:
        return []
    hi = abs(sigma) / (R - S) if R > S else np.inf
    phi_hi = math.acos(lo)
    phi_lo = math.acos(min(hi, 1.0))
    if sigma > 0:
        if phi_lo == 0.0:
            return [(-phi_hi, phi_hi)]
        return [(-phi_hi, -phi_lo), (phi_lo, phi_hi)]
    if phi_lo == 0.0:
        return [(math.pi - phi_hi, math.pi + phi_hi)]
    return [(math.pi - phi_hi, math.pi - phi_lo), (-math.pi + phi_lo, -math.pi + phi_hi)]


def line_strip_intervals(phantom, alpha, s, eps, nsample=2048):
    """Intersection of the line ``{y : alpha_vec . y = s}`` with the strip.

    Points of the line are ``c + sigma * alpha_vec + tau * alpha_perp`` with
    ``sigma = s - alpha_vec . c`` and ``alpha_perp = (-sin alpha, cos alpha)``.
    Returns a list of ``(tau1, tau2, sign)`` with ``tau1 < tau2`` on which the
    perturbation function equals ``sign * jump``.
    """
    curve, prof = phantom.curve, phantom.profile
    R, a = curve.radius, curve.arc_halfwidth
    S = eps * prof.sup_bound
    if S == 0.0:
        return []
    ca, sa = math.cos(alpha), math.sin(alpha)
    sigma = s - (ca * curve.center[0] + sa * curve.center[1])
    if sigma == 0.0:
        return _radial_line(phantom, alpha, eps)
    out = []
    for p0, p1 in _phi_windows(sigma, R, S):
        for wrap in (-2 * math.pi, 0.0, 2 * math.pi):
            u0 = max(alpha + p0 + wrap, -a)
            u1 = min(alpha + p1 + wrap, a)
            if u0 < u1:
                out.extend(_window_segments(phantom, alpha, sigma, eps, u0, u1, wrap, nsample))
    return out


def _radial_line(phantom, alpha, eps):
    R, a = phantom.curve.radius, phantom.curve.arc_halfwidth
    out = []
    for side, u in ((1.0, alpha + math.pi / 2), (-1.0, alpha - math.pi / 2)):
        u = math.atan2(math.sin(u), math.cos(u))
        if abs(u) > a:
            continue
        H = eval_Heps(phantom.profile, u, eps)
        if H == 0:
            continue
        r1, r2 = sorted((R, R - H))
        t1, t2 = sorted((side * r1, side * r2))
        out.append((t1, t2, float(np.sign(H))))
    return out


def _window_segments(phantom, alpha, sigma, eps, u0, u1, wrap, nsample):
    R, prof = phantom.curve.radius, phantom.profile

    def t_of(u):
        return R - sigma / np.cos(u - alpha - wrap)

    def gap(u):
        return t_of(u) - eval_Heps(prof, u, eps)

    bps = heps_breakpoints(prof, u0, u1, eps)
    us = np.unique(np.concatenate([np.linspace(u0, u1, nsample), bps]))
    pts = [u0, u1]
    pts.extend(float(b) for b in bps)
    for func in (t_of, gap):
        vals = np.asarray(func(us), dtype=float)
        sgn = np.sign(vals)
        for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            pts.append(brentq(func, us[i], us[i + 1], xtol=1e-16))
        pts.extend(us[sgn == 0])
    pts = np.unique(np.array(pts))
    segs = []
    for ua, ub in zip(pts[:-1], pts[1:]):
        if ub <= ua:
            continue
        um = 0.5 * (ua + ub)
        sign = _chi(float(t_of(um)), float(eval_Heps(prof, um, eps)))
        if sign == 0.0:
            continue
        ta = sigma * math.tan(ua - alpha - wrap)
        tb = sigma * math.tan(ub - alpha - wrap)
        segs.append((min(ta, tb), max(ta, tb), sign))
    return segs


def radon_exact_perturbation(phantom, alpha, p, eps):
    """Line integral of the perturbation function over ``{alpha_vec . y = p}``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    segs = line_strip_intervals(phantom, alpha, p, eps)
    return phantom.jump * math.fsum(sgn * (t2 - t1) for t1, t2, sgn in segs)


def radon_disk(phantom, alpha, p):
    """Line integral of ``jump`` times the indicator of the base disk."""
    c = phantom.curve.center
    sigma = p - (math.cos(alpha) * c[0] + math.sin(alpha) * c[1])
    R = phantom.curve.radius
    if abs(sigma) >= R:
        return 0.0
    return phantom.jump * 2 * math.sqrt(R * R - sigma * sigma)


# -- evaluation points ----------------------------------------------------

def case_point(phantom, case_label, tangent_offset=1.2, interior_offset=(0.1, 0.07)):
    """Nominal point for a case before genericity screening."""
    case = CaseLabel.parse(case_label)
    curve = phantom.curve
    y0, _ = curve_point(curve, 0.0)
    if case is CaseLabel.A_onS:
        return y0
    if case is CaseLabel.B_tangent:
        tx, ty = curve_tangent(curve, 0.0)
        return (y0[0] - tangent_offset * tx, y0[1] - tangent_offset * ty)
    return (curve.center[0] + interior_offset[0], curve.center[1] + interior_offset[1])


def transversality_margin(curve, x0, npts=4001):
    """min over the arc of |(y(u) - x0)^perp . y'(u)| / |y(u) - x0| (zero means a tangent line)."""
    a = curve.arc_halfwidth
    u = np.linspace(-a, a, npts)
    yx = curve.center[0] + curve.radius * np.cos(u) - x0[0]
    yy = curve.center[1] + curve.radius * np.sin(u) - x0[1]
    # (y - x0) . normal(u) vanishes exactly when the line x0 -> y(u) is tangent
    dot = -(yx * np.cos(u) + yy * np.sin(u))
    return float(np.min(np.abs(dot) / np.hypot(yx, yy)))


def select_point(phantom, case_label, kappa="auto", M=512, budget=16, eta_max=2.0,
                 tangent_offset=1.2, interior_offset=(0.1, 0.07), transversal_min=0.05):
    """Pick and screen an evaluation point for the requested case.

    ``kappa="auto"`` sets ``kappa = golden_ratio / |x0|`` so that
    ``kappa |x0|`` is a quadratic irrational.  Case B/C candidates are
    nudged along a fixed deterministic sequence until screening passes or the
    budget is exhausted.
    """
    from .numtheory import screen_generic

    case = CaseLabel.parse(case_label)
    curve = phantom.curve
    last = None
    for attempt in range(budget if case is not CaseLabel.A_onS else 1):
        nudge = attempt * 0.0137
        if case is CaseLabel.B_tangent:
            x0 = case_point(phantom, case, tangent_offset=tangent_offset + nudge)
        elif case is CaseLabel.C_transverse:
            x0 = case_point(phantom, case, interior_offset=(interior_offset[0] + nudge,
                                                            interior_offset[1] - 0.5 * nudge))
        else:
            x0 = case_point(phantom, case)
        norm = math.hypot(*x0)
        if norm == 0:
            continue
        kap = GOLDEN / norm if kappa == "auto" else float(kappa)
        if not kap > 0:
            raise ValueError("kappa must be positive")
        tangent = curve_tangent(curve, 0.0) if case is CaseLabel.A_onS else None
        try:
            record = screen_generic(x0, kap, tangent, M=M, curve=curve, eta_max=eta_max)
        except GenericityFailure as exc:
            last = exc
            continue
        if case is CaseLabel.C_transverse:
            margin = transversality_margin(curve, x0)
            record["transversality_margin"] = margin
            if margin < transversal_min:
                last = GenericityFailure("case C point sees a near-tangent chord",
                                         condition="transversal", record=record)
                continue
        return EvalPoint(tuple(float(v) for v in x0), case, kap, record)
    if last is None:
        last = GenericityFailure("no candidate point available")
    raise last
