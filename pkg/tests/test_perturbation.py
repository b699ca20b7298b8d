import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughedge.perturbation import (Kind, PerturbationProfile, eval_H0, eval_Heps, splitmix_uniform,
                                    total_variation, weierstrass_refinement_error)

P = PerturbationProfile

# Frozen from a pure-integer SplitMix64 implementation (arbitrary precision ints, mod 2**64).
SPLITMIX = {(7, 6): 0.46795300422287345, (0, 0): 0.8833108082136426, (7, -3): 0.5185530727738984}

ALL_KINDS = [
    P.zero(),
    P.sinusoid(1.0, 1.0),
    P.sinusoid(0.7, 2.3, 0.4),
    P.sawtooth(1.3, 0.8),
    P.weierstrass(1.0, 0.5, 1.9, 8),
    P.lattice(0.25, 1.0, jump_bound=1.0, seed=7),
    P.lattice(0.5, values=(0.0, 0.3, 0.1, 0.2)),
]


def test_eval_H0_examples():
    assert eval_H0(P.zero(), 0.37, 0.01) == 0.0
    assert eval_H0(P.sinusoid(1, 1), math.pi / 2, 0.01) == 1.0
    # finite geometric sum 1 + 1/2 + ... + 1/2**8
    # terms n = 0..8 at u = 0: exact rational oracle 2 - 2^-8
    want = float(sum(Fraction(1, 2**n) for n in range(9)))
    assert want == 1.99609375
    assert eval_H0(P.weierstrass(1.0, 0.5, 1.9, 8), 0.0, 0.01) == want


def test_eval_Heps_examples():
    assert eval_Heps(P.zero(), 0.2, 0.01) == 0.0
    assert eval_Heps(P.sinusoid(1, 1), 0.1 * math.pi / 2, 0.01) == pytest.approx(0.01, abs=1e-17)
    lat = P.lattice(0.25, 1.0, seed=7)
    # u / sqrt(eps) = 1.55 lies in cell 6 (0.3 / 0.2 rounds to just below 1.5 in binary)
    assert eval_Heps(lat, 0.31, 0.04) == pytest.approx(0.04 * (2 * SPLITMIX[(7, 6)] - 1), rel=1e-14)


def test_splitmix_matches_integer_reference():
    for (seed, idx), want in SPLITMIX.items():
        assert splitmix_uniform(seed, [idx])[0] == want


def test_total_variation_examples():
    assert total_variation(P.sinusoid(1, 1), 0.0, 2 * math.pi) == pytest.approx(4.0, abs=1e-14)
    assert total_variation(P.zero(), -3.0, 5.0) == 0.0
    lat = P.lattice(0.5, values=(0.0, 0.3, 0.1, 0.2))
    assert total_variation(lat, 0.0, 1.5) == pytest.approx(0.6, abs=1e-15)
    # brute-force partition definition (fine grid catches every jump)
    x = np.linspace(0.0, 1.5, 30001)
    assert np.sum(np.abs(np.diff(lat.h0(x)))) == pytest.approx(0.6, abs=1e-12)


def test_sinusoid_quarter_wave_is_endpoint_difference():
    prof = P.sinusoid(1, 1)
    assert total_variation(prof, 0.0, math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    levels = [np.sum(np.abs(np.diff(prof.h0(np.linspace(0, math.pi / 2, 2**k + 1))))) for k in (4, 8, 12)]
    assert all(v == pytest.approx(1.0, abs=1e-12) for v in levels)


def test_certified_constants():
    assert P.sinusoid(2.0, 3.0).tv_rate == 6.0
    assert P.sawtooth(1.0, 1.0).tv_rate == pytest.approx(2 / math.pi)
    lat = P.lattice(0.25, 1.0, jump_bound=1.0, seed=7)
    assert lat.sup_bound == 0.5
    assert lat.params["jump_bound"] <= lat.tv_rate * 0.25
    with pytest.raises(ValueError):
        P.weierstrass(1.0, 0.6, 2.0)
    with pytest.raises(ValueError):
        P.lattice(0.0)


def test_config_round_trip():
    for prof in ALL_KINDS:
        assert P.from_config(prof.to_config()) == prof


def test_weierstrass_tv_converges_below_bound():
    prof = P.weierstrass(1.0, 0.5, 1.9, 8)
    tv = total_variation(prof, 0.0, 1.0)
    assert tv <= prof.tv_rate
    assert weierstrass_refinement_error(prof, 0.0, 1.0, 16) >= 0.0


interval = st.tuples(st.floats(-50, 50), st.floats(1e-3, 20))


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, len(ALL_KINDS) - 1), iv=interval)
def test_tv_rate_bound(idx, iv):
    prof = ALL_KINDS[idx]
    a, length = iv
    tol = 1e-9
    if prof.kind is Kind.LATTICE:
        # one jump inside a window shorter than half a step exceeds any linear rate
        length = max(length, prof.params["lattice_step"] / 2)
    tv = total_variation(prof, a, a + length)
    if prof.kind is Kind.WEIERSTRASS:
        tol += weierstrass_refinement_error(prof, a, a + length, 12)
    assert tv <= prof.tv_rate * length + tol


@settings(max_examples=25, deadline=None)
@given(idx=st.integers(0, len(ALL_KINDS) - 1), seed=st.integers(0, 2**32))
def test_sup_bound(idx, seed):
    prof = ALL_KINDS[idx]
    u = np.random.default_rng(seed).uniform(-1e3, 1e3, 10_000)
    assert np.max(np.abs(prof.h0(u))) <= prof.sup_bound + 1e-15


@settings(max_examples=60, deadline=None)
@given(idx=st.integers(0, len(ALL_KINDS) - 1), u=st.floats(-10, 10), eps=st.floats(1e-6, 0.5))
def test_heps_definition(idx, u, eps):
    prof = ALL_KINDS[idx]
    assert eval_Heps(prof, u, eps) == eps * eval_H0(prof, u / math.sqrt(eps), eps)
