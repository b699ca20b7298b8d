import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from roughedge.errors import CoordinateFailure, GenericityFailure
from roughedge.perturbation import PerturbationProfile as P, eval_Heps
from roughedge.phantom import (GOLDEN, BaseCurve, CaseLabel, Phantom, case_point, curve_coords,
                               curve_point, curve_tangent, eval_fpe, radon_exact_perturbation,
                               select_point, strip_integral, transversality_margin)

CURVE = BaseCurve((-0.35, 0.15), 1.0, 0.7)
SIN = Phantom(CURVE, P.sinusoid(1, 1), 1.0)
LAT = Phantom(CURVE, P.lattice(0.25, 1.0, jump_bound=1.0, seed=7), 1.0)


def test_curve_point_examples():
    p, n = curve_point(BaseCurve((0, 0), 1.0), 0.0)
    assert p == (1.0, 0.0) and n == (-1.0, -0.0)
    p, n = curve_point(BaseCurve((0, 0), 1.0), math.pi / 2)
    assert p == pytest.approx((0.0, 1.0), abs=1e-16) and n == pytest.approx((0.0, -1.0), abs=1e-16)
    p, n = curve_point(BaseCurve((2, 0), 0.5), 0.0)
    assert p == (2.5, 0.0) and n == (-1.0, -0.0)


def test_curve_validation():
    with pytest.raises(ValueError):
        BaseCurve((0, 0), 1.0, math.pi / 4)
    with pytest.raises(ValueError):
        BaseCurve((0, 0), -1.0)
    with pytest.raises(ValueError):
        Phantom(CURVE, P.zero(), 0.0)
    with pytest.raises(CoordinateFailure):
        curve_coords(CURVE, CURVE.center)


def _point(curve, u, t):
    (yx, yy), (nx, ny) = curve_point(curve, u)
    return yx + t * nx, yy + t * ny


def test_eval_fpe_examples():
    eps = 0.04
    u = math.sqrt(eps) * math.pi / 2
    assert eval_fpe(SIN, _point(CURVE, u, -0.001), eps) == 0.0
    assert eval_fpe(SIN, _point(CURVE, u, 0.02), eps) == 1.0
    assert eval_fpe(SIN, _point(CURVE, u, 0.041), eps) == 0.0
    assert eval_fpe(Phantom(CURVE, P.zero()), _point(CURVE, 0.1, 0.01), eps) == 0.0
    # negative displacement: the strip lies outside and carries -jump
    assert eval_fpe(SIN, _point(CURVE, -u, -0.02), eps) == -1.0


def test_case_a_at_origin_centered_disk_is_not_generic():
    # for a disk centered at the origin the tangent at y(0) is orthogonal to x0
    ph = Phantom(BaseCurve((0, 0), 1.0, 0.25), P.sinusoid(1, 1))
    with pytest.raises(GenericityFailure) as info:
        select_point(ph, "A")
    assert info.value.condition == "4"


def test_select_point_case_a():
    pt = select_point(SIN, "A")
    assert pt.x0 == curve_point(CURVE, 0.0)[0]
    assert pt.kappa * math.hypot(*pt.x0) == pytest.approx(GOLDEN, rel=1e-15)
    g = pt.genericity
    assert g["passed"] and abs(g["kappa_norm_eta_hat"] - 1.0) < 0.1
    assert g["condition_2_margin"] >= 1e-3


def test_select_point_case_b_is_tangent():
    pt = select_point(SIN, "B")
    y0, _ = curve_point(CURVE, 0.0)
    tx, ty = curve_tangent(CURVE, 0.0)
    d = (pt.x0[0] - y0[0], pt.x0[1] - y0[1])
    assert abs(d[0] * ty - d[1] * tx) < 1e-14
    assert pt.case_label is CaseLabel.B_tangent


def test_select_point_case_c_is_transverse():
    pt = select_point(SIN, "C")
    assert pt.x0 == pytest.approx(case_point(SIN, "C"))
    assert transversality_margin(CURVE, pt.x0) >= 0.05
    assert pt.genericity["transversality_margin"] >= 0.05


def test_radon_exact_zero_and_far():
    assert radon_exact_perturbation(Phantom(CURVE, P.zero()), 0.3, 0.5, 0.01) == 0.0
    c = CURVE.center
    p_far = math.cos(0.2) * c[0] + math.sin(0.2) * c[1] + 1.0 + 0.01 * 1.0 + 1e-6
    assert radon_exact_perturbation(SIN, 0.2, p_far, 0.01) == 0.0


@pytest.mark.parametrize("ph", [SIN, LAT], ids=["sinusoid", "lattice"])
def test_radon_exact_against_dense_line_sampling(ph):
    eps = 0.04
    alpha = 0.0
    p = CURVE.center[0] + CURVE.radius - 0.01
    exact = radon_exact_perturbation(ph, alpha, p, eps)
    # dense midpoint sampling of the perturbation function along the line x = p
    n = 400_000
    h = 1.0 / n
    tau = -0.5 + (np.arange(n) + 0.5) * h
    vals = [eval_fpe(ph, (p, CURVE.center[1] + s), eps) for s in tau]
    brute = math.fsum(vals) * h
    assert exact != 0.0
    # midpoint sampling of a piecewise-constant integrand errs by at most h per discontinuity
    assert abs(exact - brute) <= 4 * h


@pytest.mark.parametrize("ph", [SIN, LAT], ids=["sinusoid", "lattice"])
def test_strip_area_identity(ph):
    eps = 0.01
    R, a = CURVE.radius, CURVE.arc_halfwidth

    def integrand(u):
        H = eval_Heps(ph.profile, u, eps)
        return H * R - 0.5 * H * H

    cuts = np.concatenate([[-a], ph.profile.breakpoints(-a / 0.1, a / 0.1) * 0.1, [a]])
    cuts = np.unique(cuts[(cuts >= -a) & (cuts <= a)])
    want = math.fsum(quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-12)[0] for lo, hi in zip(cuts[:-1], cuts[1:]))
    assert strip_integral(ph, eps) == pytest.approx(want, rel=1e-9, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(-3.0, 3.0), t=st.floats(-0.49, 0.49))
def test_coordinate_round_trip(u, t):
    uu, tt = curve_coords(CURVE, _point(CURVE, u, t))
    assert uu == pytest.approx(u, abs=1e-10)
    assert tt == pytest.approx(t, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(-0.69, 0.69), t=st.floats(-0.2, 0.2), eps=st.floats(1e-3, 0.05))
def test_fpe_support(u, t, eps):
    for ph in (SIN, LAT):
        if eval_fpe(ph, _point(CURVE, u, t), eps) != 0.0:
            assert abs(t) <= eps * ph.profile.sup_bound * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-math.pi / 2, math.pi / 2), extra=st.floats(1e-9, 1.0), side=st.sampled_from([-1, 1]))
def test_radon_vanishes_beyond_support(alpha, extra, side):
    eps = 0.01
    c = CURVE.center
    p = math.cos(alpha) * c[0] + math.sin(alpha) * c[1] + side * (CURVE.radius + eps * SIN.profile.sup_bound + extra)
    assert radon_exact_perturbation(SIN, alpha, p, eps) == 0.0
