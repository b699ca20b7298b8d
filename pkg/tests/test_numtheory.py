import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughedge.errors import GenericityFailure, RationalInput
from roughedge.kernels import build_kernels
from roughedge.numtheory import (compute_Am, continued_fraction, convergents, diagnostic_M, diagnostic_sums,
                                 family_spread, irrational_profile, mode_table, model_int0, model_integral_suite,
                                 model_phi, model_rem_omega, nearest_int_distance, parse_real, screen_generic)
from roughedge.perturbation import PerturbationProfile as P
from roughedge.phantom import GOLDEN, BaseCurve, Phantom, curve_point, select_point
from roughedge.reconstruct import reconstruct_at
from roughedge.sinogram import make_grid, sample_data

KS = build_kernels(4.0)
CURVE = BaseCurve((-0.35, 0.15), 1.0, 0.7)
SIN = Phantom(CURVE, P.sinusoid(1, 1))


def test_continued_fraction_examples():
    g = continued_fraction("(1+sqrt(5))/2", 40)
    assert g == [1] * 40
    assert continued_fraction(GOLDEN, 40) == [1] * len(continued_fraction(GOLDEN, 40))
    r2 = continued_fraction("sqrt(2)", 30)
    assert r2[0] == 1 and set(r2[1:]) == {2}
    conv = convergents(r2)
    assert (99, 70) in conv
    assert abs(math.sqrt(2) - 99 / 70) < 1 / 70**2
    with pytest.raises(RationalInput):
        continued_fraction(1.5)


def test_float_expansion_is_precision_limited():
    # a double carries about 53 bits, so only the convergents it can resolve are returned
    terms = continued_fraction(GOLDEN, 60)
    assert 25 <= len(terms) < 60 and set(terms) == {1}


def test_nearest_int_distance_examples():
    assert nearest_int_distance(GOLDEN, 1) == pytest.approx(0.3819660113, abs=1e-10)
    assert nearest_int_distance(GOLDEN, 2) == pytest.approx(0.2360679775, abs=1e-10)
    assert nearest_int_distance(0.5, 2) == 0.0


def test_parse_real_is_safe():
    assert float(parse_real("pi")) == math.pi
    with pytest.raises(ValueError):
        parse_real("__import__('os')")


def test_screen_generic_examples():
    rec = screen_generic((1.0, 0.0), GOLDEN, M=512)
    assert abs(rec["kappa_norm_eta_hat"] - 1.0) < 0.1
    with pytest.raises(GenericityFailure) as info:
        screen_generic((1.0, 0.0), 1.5, M=512)
    assert info.value.condition == "3" and "m = 2" in str(info.value)
    # the diagonal through the origin and x0 = (1, 1) is tangent to the circle of radius 1/sqrt(2) about (0, 1)
    curve = BaseCurve((0.0, 1.0), 1 / math.sqrt(2), 0.3)
    with pytest.raises(GenericityFailure) as info:
        screen_generic((1.0, 1.0), GOLDEN / math.sqrt(2), M=512, curve=curve)
    assert info.value.condition == "2"


def test_profile_eta_for_classic_numbers():
    assert abs(irrational_profile("sqrt(2)").eta_hat - 1.0) < 0.1
    assert irrational_profile("pi").eta_hat < 2.0


def test_compute_Am_zero_and_symmetry():
    x0, _ = curve_point(CURVE, 0.0)
    eps = 2.0**-5
    assert compute_Am(Phantom(CURVE, P.zero()), KS, x0, 3, 0.1, eps) == 0
    a = compute_Am(SIN, KS, x0, 3, 0.05, eps)
    b = compute_Am(SIN, KS, x0, -3, 0.05, eps)
    assert abs(b - a.conjugate()) <= 1e-10 * abs(a)
    tab = mode_table(SIN, KS, x0, [0.05, -0.2], eps, 4)
    assert np.all(tab[:, 0].imag == 0.0)


def test_compute_Am_table_against_direct():
    x0, _ = curve_point(CURVE, 0.0)
    eps = 2.0**-5
    for m in (0, 2):
        a = compute_Am(SIN, KS, x0, m, 0.02, eps)
        d = compute_Am(SIN, KS, x0, m, 0.02, eps, method="direct")
        assert abs(a - d) <= 1e-6 * max(abs(d), 1e-3)


def test_mode_sum_reproduces_reconstruction():
    pt = select_point(SIN, "A")
    eps = 2.0**-5
    grid = make_grid(SIN, eps, pt.kappa, KS.aperture)
    sino = sample_data(SIN, grid, KS.aperture)
    x = (pt.x0[0] + 0.3 * eps, pt.x0[1] - 0.2 * eps)
    M = 32
    al = grid.alphas()
    A = mode_table(SIN, KS, x, al, eps, M)
    phase = (np.cos(al) * x[0] + np.sin(al) * x[1] - grid.p_bar) / eps
    m = np.arange(1, M + 1)
    rows = A[:, 0].real + 2 * np.real(np.sum(np.exp(-2j * np.pi * np.outer(phase, m)) * A[:, 1:], axis=1))
    total = -grid.dalpha / (2 * math.pi) * math.fsum(rows)
    assert total == pytest.approx(reconstruct_at(sino, KS, x), rel=1e-6)


def test_diagnostic_sums_zero_and_M():
    zero = Phantom(CURVE, P.zero())
    x0, _ = curve_point(CURVE, 0.0)
    grid = make_grid(zero, 2.0**-5, 1.7, KS.aperture)
    d = diagnostic_sums(zero, KS, x0, grid)
    assert d.S_I == 0.0 and d.S_II == 0.0
    assert diagnostic_M(2.0**-5, KS.gamma) == 8
    assert diagnostic_M(1e-12, KS.gamma) == 64
    assert diagnostic_M(2.0**-30, 1 / 6) == 32


def test_model_int0_closed_form():
    # int_R dx / (1 + x^4) = (1/2) B(1/4, 3/4) = pi / sqrt(2)
    c0 = float(mpmath.beta(0.25, 0.75)) / 2
    assert c0 == pytest.approx(math.pi / math.sqrt(2), rel=1e-15)
    for eps in (2.0**-4, 2.0**-7, 2.0**-10):
        assert model_int0(0.0, eps) == pytest.approx(c0 * math.sqrt(eps), rel=1e-9)


def test_model_integral_examples():
    eps_list = [2.0**-i for i in range(4, 11)]
    mid = [model_rem_omega(c * eps, eps, 0.5) / math.sqrt(eps) for eps in eps_list for c in (0, 1, 2, 4)]
    assert max(mid) / min(mid) <= 10
    phi2 = [model_phi(16 * eps, eps)[1] / (eps / math.sqrt(16 * eps)) for eps in eps_list]
    assert max(phi2) / min(phi2) <= 1.5


def test_model_integral_suite_small_grid():
    rows = model_integral_suite(eps_list=(2.0**-4, 2.0**-6), alpha_list=(0.0, 0.1))
    spreads = family_spread(rows)
    assert {"int0", "add1", "der", "omega", "phi1", "phi2", "j22a", "j22b"} == {f for f, _ in spreads}
    assert all(v <= 10 for v in spreads.values())


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 500).filter(lambda n: math.isqrt(n) ** 2 != n))
def test_convergent_inequality(n):
    s = f"sqrt({n})"
    terms = continued_fraction(s, 25)
    conv = convergents(terms)
    x = Fraction(str(mpmath.nstr(parse_real(s), 60)))
    for (p, q), (_, q2) in zip(conv[:-1], conv[1:]):
        assert abs(x - Fraction(p, q)) < Fraction(1, q * q2)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 200).filter(lambda n: math.isqrt(n) ** 2 != n))
def test_quadratic_irrationals_have_type_one(n):
    prof = irrational_profile(f"sqrt({n})", M=512)
    m = np.arange(1, 513)
    # m <m s> stays above a positive constant (bounded partial quotients)
    assert np.min(m * prof.margins) > 1.0 / (2 * max(prof.terms) + 4)
