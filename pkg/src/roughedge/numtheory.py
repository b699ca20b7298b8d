"""Diophantine screening, angular Fourier-mode coefficients and model integrals.

Screening
    Continued fractions and nearest-integer distances are computed in exact
    rational arithmetic on the binary value of the input (``fractions``), so
    no digits are lost at large ``m``.  The working precision of the input
    decides how many partial quotients are meaningful.

Mode coefficients
    ``A_m(alpha, eps) = eps^-2 iint psi_m(alpha . (y - x) / eps) f(y) dy`` is
    evaluated on the strip quadrature nodes with the tabulated Fourier
    coefficients of the periodized kernel.

Model integrals
    Each integral family is evaluated with adaptive quadrature and divided by
    its stated bound; a family passes if the ratio is bounded by one
    constant (max/min within a factor) over the whole grid.
"""

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numba as nb
import numpy as np
from scipy.integrate import quad

from . import _nb
from .errors import GenericityFailure, QuadratureFailure, RationalInput
from .kernels import psi_fourier

__all__ = [
    "parse_real", "continued_fraction", "convergents", "nearest_int_distance", "IrrationalProfile",
    "irrational_profile", "screen_generic", "compute_Am", "mode_table", "DiagnosticSums",
    "diagnostic_sums", "diagnostic_M", "model_integral_suite", "ModelRow", "family_spread",
]


# -- exact arithmetic helpers ------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": lambda: mpmath.pi, "e": lambda: mpmath.e, "phi": lambda: mpmath.phi}
_FUNCS = {"sqrt": mpmath.sqrt, "cbrt": mpmath.cbrt, "exp": mpmath.exp, "log": mpmath.log}


def parse_real(text, dps=60):
    """Evaluate an arithmetic expression such as ``"(1+sqrt(5))/2"`` at ``dps`` digits.

    Only numbers, ``+ - * / **``, the constants ``pi``, ``e``, ``phi`` and the
    functions ``sqrt``, ``cbrt``, ``exp``, ``log`` are accepted.
    """
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return mpmath.mpf(node.value) if isinstance(node.value, int) else mpmath.mpf(repr(node.value))
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]()
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported expression element in {text!r}")

    with mpmath.workdps(dps):
        return +ev(ast.parse(text, mode="eval"))


def _exact(s):
    """Exact rational value of ``s`` and its relative working precision."""
    if isinstance(s, Fraction):
        return s, 0.0
    if isinstance(s, str):
        s = parse_real(s)
    if isinstance(s, mpmath.mpf):
        man, exp = s.man_exp
        if man == 0:
            return Fraction(0), 2.0**-53
        sign = -1 if s < 0 else 1
        val = Fraction(sign * abs(int(man))) * (Fraction(2) ** int(exp))
        return val, 2.0 ** -max(53, abs(int(man)).bit_length())
    val = Fraction(float(s))
    return val, 2.0**-53


def continued_fraction(s, n_terms=40):
    """Partial quotients ``[a0, a1, ...]`` of ``s``.

    ``s`` may be a float, an ``mpmath.mpf`` or a string parsed by mpmath at
    60 digits.  The expansion stops early (returning fewer than ``n_terms``
    quotients) once the convergent denominators exceed what the input
    precision can resolve.  A :class:`RationalInput` is raised when the input
    equals, at working precision, a fraction whose denominator is still well
    inside that range.
    """
    x, delta = _exact(s)
    q_limit = math.inf if delta == 0.0 else 2.0**-6 / math.sqrt(delta)
    target = x
    scale = max(1.0, abs(float(x)))
    terms = []
    p0, q0, p1, q1 = 1, 0, 0, 1
    while len(terms) < n_terms:
        a = math.floor(x)
        terms.append(int(a))
        p0, q0, p1, q1 = a * p0 + p1, a * q0 + q1, p0, q0
        frac = x - a
        err = abs(target - Fraction(p0, q0))
        if frac == 0 or (delta > 0 and err <= 2 * delta * scale):
            if q0 < q_limit:
                raise RationalInput(f"{float(target)!r} equals {p0}/{q0} at working precision")
            terms.pop()
            break
        if q0 >= q_limit:
            break
        x = 1 / frac
    return terms


def convergents(terms):
    """Convergents ``(p_i, q_i)`` of a list of partial quotients."""
    out = []
    p0, q0, p1, q1 = 1, 0, 0, 1
    for a in terms:
        p0, q0, p1, q1 = a * p0 + p1, a * q0 + q1, p0, q0
        out.append((p0, q0))
    return out


def nearest_int_distance(s, m):
    """``<m s>``, the distance from ``m s`` to the nearest integer (exact for binary inputs)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    x = _exact(s)[0] * int(m)
    return float(abs(x - round(x)))


def _margins(s, M):
    x = _exact(s)[0]
    out = np.empty(M)
    for m in range(1, M + 1):
        y = x * m
        out[m - 1] = float(abs(y - round(y)))
    return out


@dataclass(frozen=True, eq=False)
class IrrationalProfile:
    """Screening summary for one real number.

    ``eta_hat`` is minus the least-squares slope of ``log <ms>`` against
    ``log m`` over the record minima with ``m >= 8`` (all records with
    ``m >= 2`` when fewer than three qualify); ``eta_max_formula``
    is the raw ``max_{2<=m<=M} log(1/<ms>)/log m``, which is dominated by
    small ``m`` and reported for reference.
    """

    value: float
    terms: tuple
    margins: np.ndarray
    eta_hat: float
    eta_max_formula: float
    record_m: tuple
    first_zero: object = None

    def scaled_min(self, eta=None):
        """``min_m m^(eta + 1/2) <ms>``."""
        eta = self.eta_hat if eta is None else eta
        m = np.arange(1, self.margins.size + 1)
        return float(np.min(m ** (eta + 0.5) * self.margins))


def irrational_profile(s, M=512, n_terms=40):
    if M < 8:
        raise ValueError("M must be at least 8")
    d = _margins(s, M)
    m = np.arange(1, M + 1)
    zero = np.flatnonzero(d == 0)
    try:
        terms = tuple(continued_fraction(s, n_terms))
    except RationalInput:
        terms = ()
    if zero.size:
        return IrrationalProfile(float(parse_real(s)) if isinstance(s, str) else float(s),
                                 terms, d, math.inf, math.inf, (), int(m[zero[0]]))
    rec = []
    best = math.inf
    for i in range(M):
        if d[i] < best:
            best = d[i]
            rec.append(i)
    rec = np.array(rec)
    # records cluster when a large partial quotient follows; three points keep
    # the fit from being decided by one close pair
    use = rec[m[rec] >= 8]
    if use.size < 3:
        use = rec[m[rec] >= 2]
    if use.size >= 2:
        eta = -float(np.polyfit(np.log(m[use]), np.log(d[use]), 1)[0])
    else:
        eta = 0.0
    eta = max(eta, 0.0)
    raw = float(np.max(np.log(1 / d[1:]) / np.log(m[1:])))
    val = float(parse_real(s)) if isinstance(s, str) else float(s)
    return IrrationalProfile(val, terms, d, eta, raw, tuple(int(v) for v in m[rec]))


def _tangent_margin(curve, x0):
    """``|dist(center, line through 0 and x0) - R| / R``; zero means the line is tangent."""
    n = math.hypot(*x0)
    ux, uy = x0[0] / n, x0[1] / n
    c = curve.center
    dist = abs(c[0] * uy - c[1] * ux)
    return abs(dist - curve.radius) / curve.radius


def screen_generic(x0, kappa, tangent_dir=None, M=512, curve=None, eta_max=2.0, threshold=1e-3,
                   tangent_min=1e-3):
    """Check the generic-point conditions and return a record of the margins.

    Condition (1) concerns zero-curvature points and holds automatically
    for circular arcs.  Condition (2) needs ``curve``.  Condition (3)
    screens ``kappa |x0|``; condition (4) screens ``kappa (t . x0)`` when a
    unit tangent ``tangent_dir`` is given (points on the curve).

    A number passes if its estimated type is finite, at most ``eta_max``,
    and ``min_m m^(eta_hat + 1/2) <ms> >= threshold``.
    """
    if M < 64:
        raise ValueError("M must be at least 64")
    x0 = (float(x0[0]), float(x0[1]))
    norm = math.hypot(*x0)
    if norm == 0:
        raise GenericityFailure("x0 at the origin has no defined direction", condition="3")
    record = {"condition_1": "auto (circular arc has no zero-curvature points)", "M": int(M),
              "threshold": threshold, "eta_max": eta_max}
    if curve is not None:
        margin = _tangent_margin(curve, x0)
        record["condition_2_margin"] = margin
        if margin < tangent_min:
            raise GenericityFailure("the line through the origin and x0 is tangent to the curve",
                                    condition="2", record=record)
    checks = [("3", "kappa_norm", kappa * norm)]
    if tangent_dir is not None:
        t = (float(tangent_dir[0]), float(tangent_dir[1]))
        checks.append(("4", "kappa_tangent", kappa * (t[0] * x0[0] + t[1] * x0[1])))
    for cond, name, s in checks:
        prof = irrational_profile(s, M)
        record[f"{name}"] = s
        record[f"{name}_eta_hat"] = prof.eta_hat
        record[f"{name}_eta_max_formula"] = prof.eta_max_formula
        record[f"{name}_cf"] = list(prof.terms[:12])
        if prof.first_zero is not None:
            raise GenericityFailure(f"{name} = {s!r} is rational at m = {prof.first_zero}",
                                    condition=cond, record=record)
        smin = prof.scaled_min()
        record[f"{name}_scaled_min"] = smin
        record[f"{name}_min_margin"] = float(prof.margins.min())
        if not (prof.eta_hat <= eta_max and smin >= threshold):
            raise GenericityFailure(f"{name} = {s!r} fails screening (eta_hat={prof.eta_hat:.3g}, "
                                    f"scaled min={smin:.3g})", condition=cond, record=record)
    record["passed"] = True
    return record


# -- angular Fourier-mode coefficients ----------------------------------------------

@nb.njit(cache=True)
def _mode_sums(ca, sa, bx, by, cu, su, wu, H, R, eps, tn, tw, cre, cim, dre, dim, tstep, tmax,
               tail0, M):
    nk = ca.shape[0]
    out_re = np.zeros((nk, M + 1))
    out_im = np.zeros((nk, M + 1))
    for k in range(nk):
        base = ca[k] * bx + sa[k] * by
        for i in range(cu.shape[0]):
            h = H[i]
            if h == 0.0:
                continue
            cosd = cu[i] * ca[k] + su[i] * sa[k]
            for g in range(tn.shape[0]):
                t = 0.5 * h * (1.0 + tn[g])
                rho = R - t
                arg = (base + rho * cosd) / eps
                wt = wu[i] * 0.5 * h * tw[g] * rho
                if abs(arg) <= tmax:
                    x = arg + tmax
                    out_re[k, 0] += wt * _nb.hermite(cre[0], dre[0], tstep, x)
                    for m in range(1, M + 1):
                        out_re[k, m] += wt * _nb.hermite(cre[m], dre[m], tstep, x)
                        out_im[k, m] += wt * _nb.hermite(cim[m], dim[m], tstep, x)
                else:
                    out_re[k, 0] += wt * _nb.even_series(abs(arg), tail0)
    return out_re, out_im


def _table_arrays(table, M):
    if M > table.m_max:
        raise ValueError(f"M={M} exceeds the tabulated range {table.m_max}")
    c = np.ascontiguousarray(table.coef[:, :M + 1].T)
    d = np.ascontiguousarray(table.dcoef[:, :M + 1].T)
    return (np.ascontiguousarray(c.real), np.ascontiguousarray(c.imag),
            np.ascontiguousarray(d.real), np.ascontiguousarray(d.imag))


def mode_table(phantom, ks, x, alphas, eps, M, t_order=8):
    """``A_m(alpha, eps)`` for ``m = 0..M`` and every angle; shape ``(len(alphas), M + 1)``."""
    from .kernels import _gl
    from .phantom import strip_nodes

    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if phantom.profile.sup_bound == 0.0:
        return np.zeros((alphas.size, M + 1), dtype=complex)
    table = ks.fourier
    u, wu, H = strip_nodes(phantom, eps)
    tn, tw = _gl(t_order)
    c = phantom.curve.center
    cre, cim, dre, dim = _table_arrays(table, M)
    re, im = _mode_sums(np.cos(alphas), np.sin(alphas), c[0] - x[0], c[1] - x[1],
                        np.cos(u), np.sin(u), wu, H, phantom.curve.radius, eps, tn, tw,
                        cre, cim, dre, dim, table.t_step, table.t_max, table.tail0, int(M))
    return phantom.jump * (re + 1j * im) / eps**2


def compute_Am(phantom, ks, x, m, alpha, eps, method="table", t_order=8):
    """Single coefficient ``A_m(alpha, eps)`` at the point ``x``.

    ``method="table"`` uses the tabulated Fourier coefficients;
    ``method="direct"`` evaluates each ``psi_m`` by whole-line quadrature of
    the closed-form kernel (slow, for spot checks).
    """
    m = int(m)
    if method == "table":
        row = mode_table(phantom, ks, x, [alpha], eps, abs(m), t_order)[0, abs(m)]
        return complex(np.conj(row)) if m < 0 else complex(row)
    if method != "direct":
        raise ValueError("method must be 'table' or 'direct'")
    from .kernels import _gl
    from .phantom import strip_nodes

    if phantom.profile.sup_bound == 0.0:
        return 0j
    u, wu, H = strip_nodes(phantom, eps)
    tn, tw = _gl(t_order)
    c = phantom.curve.center
    R = phantom.curve.radius
    ca, sa = math.cos(alpha), math.sin(alpha)
    base = ca * (c[0] - x[0]) + sa * (c[1] - x[1])
    acc = []
    for ui, wi, h in zip(u, wu, H):
        if h == 0.0:
            continue
        t = 0.5 * h * (1 + tn)
        rho = R - t
        args = (base + rho * math.cos(ui - alpha)) / eps
        vals = np.array([psi_fourier(ks, m, a) for a in args])
        acc.append(wi * 0.5 * h * np.sum(tw * rho * vals))
    return phantom.jump * complex(np.sum(acc)) / eps**2


def diagnostic_M(eps, gamma, cap=64, floor=8):
    """Mode cutoff ``ceil(eps^-gamma)`` clipped to ``[floor, cap]``."""
    return int(min(cap, max(floor, math.ceil(eps ** (-gamma)))))


@dataclass(eq=False)
class DiagnosticSums:
    eps: float
    M: int
    alphas: np.ndarray
    A: np.ndarray  # shape (nk, M + 1), column m holds A_m(alpha_k)
    partial_I: np.ndarray  # |sum_k e(-m alpha_k . x / eps) A_m| for m = 1..M
    S_I: float
    S_II: float
    extras: dict = field(default_factory=dict)


def diagnostic_sums(phantom, ks, x0, grid, M=None, order_II=8):
    """Aggregates I and II on the angular lattice of ``grid``.

    ``S_I = dalpha sum_{m != 0} |sum_k e(-m alpha_k . x0 / eps) A_m(alpha_k)|``,
    computed as twice the sum over ``m = 1..M`` since ``A_{-m}`` is the
    conjugate of ``A_m``.  ``S_II = sum_k int_cell |A_0(alpha) - A_0(alpha_k)| dalpha``
    with cells ``[alpha_k - dalpha/2, alpha_k + dalpha/2]`` and ``order_II``
    Gauss-Legendre nodes per cell.
    """
    eps = grid.eps
    if M is None:
        M = diagnostic_M(eps, ks.gamma)
    if M < 8:
        raise ValueError("M must be at least 8")
    al = grid.alphas()
    da = grid.dalpha
    A = mode_table(phantom, ks, x0, al, eps, M)
    proj = (np.cos(al) * x0[0] + np.sin(al) * x0[1]) / eps
    ms = np.arange(1, M + 1)
    phase = np.exp(-2j * np.pi * np.outer(proj, ms))
    partial = np.abs(np.sum(phase * A[:, 1:], axis=0))
    S_I = 2 * da * float(math.fsum(partial))
    xg, wg = np.polynomial.legendre.leggauss(order_II)
    sub = (al[:, None] + 0.5 * da * xg[None, :]).ravel()
    A0 = mode_table(phantom, ks, x0, sub, eps, 0)[:, 0].real.reshape(al.size, order_II)
    S_II = float(math.fsum((0.5 * da * np.abs(A0 - A[:, :1].real) * wg[None, :]).ravel()))
    return DiagnosticSums(eps, int(M), al, A, partial, S_I, S_II)


# -- model integrals ------------------------------------------------------------------

@dataclass(frozen=True)
class ModelRow:
    family: str
    case: str
    eps: float
    alpha: float
    value: float
    bound: float

    @property
    def ratio(self):
        return self.value / self.bound


def _quad_pieces(f, cuts, rtol=1e-10):
    """Sum of adaptive quadratures over consecutive cut intervals (may include infinities)."""
    total = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        val, err = quad(f, a, b, limit=500, epsabs=0.0, epsrel=rtol)
        if not math.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300) + 1e-300:
            raise QuadratureFailure(f"no convergence on [{a}, {b}] (estimate {val}, error {err})")
        total.append(val)
    return math.fsum(total)


def _sorted_cuts(points, lo=-math.inf, hi=math.inf):
    pts = sorted({float(p) for p in points if lo < p < hi})
    return [lo] + pts + [hi]


def _cluster(centers, widths, lo=-math.inf, hi=math.inf):
    pts = []
    for c in centers:
        for w in widths:
            pts += [c - w, c, c + w]
    return _sorted_cuts(pts, lo, hi)


def model_int0(alpha, eps):
    """``int_R dtheta / (1 + (theta (theta - alpha) / eps)^2)``."""
    f = lambda th: 1.0 / (1.0 + (th * (th - alpha) / eps) ** 2)
    r = math.sqrt(eps)
    widths = [eps / max(abs(alpha), r), r, 4 * r, 16 * r]
    return _quad_pieces(f, _cluster([0.0, alpha], widths))


def model_add1(abar):
    """Scaled form of the add-1 integral: ``int_{|t|<=1} |t| / (1 + (t (abar + t))^2) dt``."""
    f = lambda t: abs(t) / (1.0 + (t * (abar + t)) ** 2)
    return _quad_pieces(f, _sorted_cuts([0.0, -abar, 1 / max(abar, 1.0)], -1.0, 1.0))


def model_der(abar):
    """Scaled form: ``(int_{-inf}^{abar-1} + int_{abar+1}^{inf}) |t| / (1 + (t (t - abar))^2) dt``."""
    f = lambda t: abs(t) / (1.0 + (t * (t - abar)) ** 2)
    w = 1 / max(abar, 1.0)
    left = _quad_pieces(f, _sorted_cuts([0.0, -w, w, abar - 1 - w], -math.inf, abar - 1))
    right = _quad_pieces(f, _sorted_cuts([abar + 1 + w], abar + 1, math.inf))
    return left + right


def model_rem_omega(alpha, eps, a):
    """``int_{-a}^{a} dtheta / (1 + ((theta^2 - alpha)/eps)^2)`` (even integrand, done on [0, a])."""
    f = lambda th: 1.0 / (1.0 + ((th * th - alpha) / eps) ** 2)
    pts = [0.0, a]
    if alpha > 0:
        mu = math.sqrt(alpha)
        w = eps / mu
        pts += [mu - 4 * w, mu - w, mu, mu + w, mu + 4 * w]
    pts += [math.sqrt(eps), 4 * math.sqrt(eps)]
    return 2 * _quad_pieces(f, _sorted_cuts(pts, 0.0, a))


def model_phi(alpha, eps):
    """``(Phi_1, Phi_2)``: the integral over ``|theta^2 - alpha| >= sqrt(eps alpha)`` and its complement."""
    f = lambda th: 1.0 / (1.0 + ((th * th - alpha) / eps) ** 2)
    mu = math.sqrt(alpha)
    d = math.sqrt(eps * alpha)
    inner_lo = math.sqrt(max(alpha - d, 0.0))
    inner_hi = math.sqrt(alpha + d)
    w = eps / mu
    # even integrand: integrate on theta >= 0 and double
    phi2 = 2 * _quad_pieces(f, _sorted_cuts([mu - w, mu, mu + w], inner_lo, inner_hi))
    phi1 = 2 * (_quad_pieces(f, _sorted_cuts([math.sqrt(eps)], 0.0, inner_lo))
                + _quad_pieces(f, _sorted_cuts([inner_hi + w, 2 * inner_hi], inner_hi, math.inf)))
    return phi1, phi2


def model_j22a(ptil, N):
    n = np.arange(1, N)
    return float(math.fsum(1.0 / (n * (1.0 + np.abs(n + ptil)))))


def model_j22b(ptil):
    f = lambda x: 1.0 / ((1.0 + abs(ptil + x)) * x * x)
    return _quad_pieces(f, _sorted_cuts([-ptil - 1, -ptil, -ptil + 1, 2.0, 4.0], 1.0, math.inf))


DEFAULT_EPS = tuple(2.0**-i for i in range(4, 11))
DEFAULT_ALPHA0 = (0.0, 0.01, -0.01, 0.03, 0.1, 0.3, 1.0)
DEFAULT_ABAR = (4.0, 8.0, 16.0, 64.0, 256.0)
DEFAULT_ABAR_DER = (0.0, 1.0, 4.0, 16.0, 64.0, 256.0)
DEFAULT_PHI_C = (4.0, 8.0, 16.0, 64.0, 256.0)
DEFAULT_J22_ALPHA = (0.5, -0.5, 1.0, -1.0)


def model_integral_suite(eps_list=DEFAULT_EPS, alpha_list=DEFAULT_ALPHA0, a=0.5):
    """Evaluate every model-integral family over the grids; returns a list of :class:`ModelRow`.

    Families and grids (``abar = alpha / sqrt(eps)``):

    * ``int0``: ``alpha`` in ``alpha_list``, bound ``eps^(1/2) (1 + |alpha|/eps^(1/2))^-1``.
    * ``add1``: ``abar`` in (4, 8, 16, 64, 256), bound ``abar^-2 ln abar``.
    * ``der``: ``abar`` in (0, 1, 4, 16, 64, 256), bound ``(1 + |abar|)^-1``.
    * ``omega_high``: ``alpha = a^2 + c eps``, c in (0, 1, 4, 16), bound ``eps (1 + (alpha - a^2)/eps)^-1``.
    * ``omega_mid``: ``alpha = c eps``, c in (0, 1, 2, 4), bound ``eps^(1/2)``.
    * ``omega_neg``: ``alpha = -c eps``, c in (0, 1, 4, 16, 64), bound ``eps^(1/2) (1 + |alpha|/eps)^(-3/2)``.
    * ``phi1``/``phi2``: ``alpha = c eps`` (c in (4, 8, 16, 64, 256), ``alpha <= pi/2``),
      bounds ``eps^(3/2)/alpha`` and ``eps / alpha^(1/2)``.
    * ``j22a``/``j22b``: ``ptil = alpha / eps^(1/2)`` for alpha in (+-0.5, +-1), ``N = ceil(2/eps^(1/2))``,
      bounds ``ln|ptil| / |ptil|`` and ``1/|ptil|``.
    """
    rows = []
    for eps in eps_list:
        r = math.sqrt(eps)
        for al in alpha_list:
            rows.append(ModelRow("int0", "-", eps, al, model_int0(al, eps), r / (1 + abs(al) / r)))
        for ab in DEFAULT_ABAR:
            # the scaled integral equals the unscaled one exactly (change of variables)
            rows.append(ModelRow("add1", "-", eps, ab * r, model_add1(ab), math.log(ab) / ab**2))
        for ab in DEFAULT_ABAR_DER:
            rows.append(ModelRow("der", "-", eps, ab * r, model_der(ab), 1 / (1 + ab)))
        for c in (0.0, 1.0, 4.0, 16.0):
            al = a * a + c * eps
            rows.append(ModelRow("omega", "high", eps, al, model_rem_omega(al, eps, a),
                                 eps / (1 + (al - a * a) / eps)))
        for c in (0.0, 1.0, 2.0, 4.0):
            al = c * eps
            rows.append(ModelRow("omega", "mid", eps, al, model_rem_omega(al, eps, a), r))
        for c in (0.0, 1.0, 4.0, 16.0, 64.0):
            al = -c * eps
            rows.append(ModelRow("omega", "neg", eps, al, model_rem_omega(al, eps, a),
                                 r * (1 + abs(al) / eps) ** -1.5))
        for c in DEFAULT_PHI_C:
            al = c * eps
            if al > math.pi / 2:
                continue
            p1, p2 = model_phi(al, eps)
            rows.append(ModelRow("phi1", "-", eps, al, p1, eps**1.5 / al))
            rows.append(ModelRow("phi2", "-", eps, al, p2, eps / math.sqrt(al)))
        N = math.ceil(2 / r)
        for al in DEFAULT_J22_ALPHA:
            pt = al / r
            rows.append(ModelRow("j22a", "-", eps, al, model_j22a(pt, N), math.log(abs(pt)) / abs(pt)))
            rows.append(ModelRow("j22b", "-", eps, al, model_j22b(pt), 1 / abs(pt)))
    return rows


def family_spread(rows):
    """``{(family, case): max ratio / min ratio}`` over the rows."""
    groups = {}
    for row in rows:
        groups.setdefault((row.family, row.case), []).append(row.ratio)
    return {key: max(v) / min(v) for key, v in groups.items()}
