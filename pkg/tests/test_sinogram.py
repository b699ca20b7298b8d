import math

import numpy as np
import pytest
from scipy.integrate import quad

from roughedge.errors import CacheIntegrityError, GridCoverageError
from roughedge.kernels import Aperture
from roughedge.perturbation import PerturbationProfile as P
from roughedge.phantom import BaseCurve, Phantom, radon_exact_perturbation, strip_integral
from roughedge.sinogram import data_row_support, make_grid, read_sinogram, sample_data, write_sinogram

AP = Aperture(6)
CURVE = BaseCurve((-0.35, 0.15), 1.0, 0.7)
SIN = Phantom(CURVE, P.sinusoid(1, 1))
ORIGIN_ZERO = Phantom(BaseCurve((0.0, 0.0), 1.0, 0.25), P.zero())


def test_zero_profile_is_all_zero():
    ph = Phantom(CURVE, P.zero())
    sino = sample_data(ph, make_grid(ph, 2.0**-5, 1.7, AP), AP)
    assert not np.any(sino.values)
    assert data_row_support(sino, sino.grid.k_lo) is None


def test_full_mode_central_chord():
    eps = 2.0**-6
    grid = make_grid(ORIGIN_ZERO, eps, 1.3, AP, p_bar=0.0, alpha_bar=0.0, mode="full")
    sino = sample_data(ORIGIN_ZERO, grid, AP, mode="full")
    v = sino.values[-grid.k_lo, -grid.j_lo]
    assert abs(v - 2.0) <= 2 * eps**2


def test_full_mode_symmetry_and_mass():
    eps = 2.0**-5
    grid = make_grid(ORIGIN_ZERO, eps, 1.3, AP, p_bar=0.0, alpha_bar=0.0, mode="full")
    sino = sample_data(ORIGIN_ZERO, grid, AP, mode="full")
    assert -grid.j_lo == grid.j_hi
    assert np.max(np.abs(sino.values - sino.values[:, ::-1])) <= 1e-9
    mass = grid.dp * sino.values.sum(axis=1)
    assert np.max(np.abs(mass - math.pi) / math.pi) <= 1e-6


def test_mass_identity_with_perturbation():
    eps = 2.0**-5
    grid = make_grid(SIN, eps, 1.3, AP, mode="full")
    sino = sample_data(SIN, grid, AP, mode="full")
    want = math.pi + strip_integral(SIN, eps)
    mass = grid.dp * sino.values.sum(axis=1)
    assert np.max(np.abs(mass - want) / want) <= 1e-6


def test_linearity_of_perturbation_plus_disk():
    eps = 2.0**-5
    grid = make_grid(SIN, eps, 1.3, AP, mode="full")
    pert = sample_data(SIN, grid, AP, mode="perturbation")
    disk = sample_data(Phantom(CURVE, P.zero()), grid, AP, mode="full")
    full = sample_data(SIN, grid, AP, mode="full")
    assert np.max(np.abs((pert + disk).values - full.values)) <= 1e-12


def test_row_support_full_mode_width():
    eps = 2.0**-5
    grid = make_grid(ORIGIN_ZERO, eps, 1.3, AP, p_bar=0.0, alpha_bar=0.0, mode="full")
    sino = sample_data(ORIGIN_ZERO, grid, AP, mode="full")
    lo, hi = data_row_support(sino, 0, tol=1e-300)
    L = AP.support_radius
    want = 2 * (1.0 + L * eps) / eps
    assert abs((hi - lo) - want) <= 2


def test_values_vanish_outside_structural_support():
    eps = 2.0**-5
    sino = sample_data(SIN, make_grid(SIN, eps, 1.3, AP), AP)
    for k in range(sino.grid.nk):
        row = sino.values[k]
        mask = np.ones(row.size, bool)
        if sino.row_hi[k] >= sino.row_lo[k]:
            mask[sino.row_lo[k]:sino.row_hi[k] + 1] = False
        assert not np.any(row[mask])


def _cell_oracle(ph, alpha, p, eps):
    L = AP.support_radius
    f = lambda z: float(AP.pp(z)) * radon_exact_perturbation(ph, alpha, p - eps * z, eps)
    pts = np.arange(-L, L + 0.5, 1.0)
    return math.fsum(quad(f, a, b, epsabs=1e-15, epsrel=1e-12, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))


def test_cells_against_line_integral_oracle():
    eps = 2.0**-5
    sino = sample_data(SIN, make_grid(SIN, eps, 1.3, AP), AP)
    al, ps = sino.grid.alphas(), sino.grid.offsets()
    big = np.argwhere(np.abs(sino.values) > 0.05 * np.abs(sino.values).max())
    for k, j in big[np.random.default_rng(5).choice(len(big), 2, replace=False)]:
        o = _cell_oracle(SIN, al[k], ps[j], eps)
        assert sino.values[k, j] == pytest.approx(o, rel=1e-6)


def test_coverage_error():
    eps = 2.0**-5
    grid = make_grid(SIN, eps, 1.3, AP)
    with pytest.raises(GridCoverageError):
        make_grid(SIN, eps, 1.3, AP, j_range=(grid.j_lo + 3, grid.j_hi))


def test_cache_round_trip_and_corruption(tmp_path):
    eps = 2.0**-5
    sino = sample_data(SIN, make_grid(SIN, eps, 1.3, AP), AP)
    path = tmp_path / "s.bin"
    digest = write_sinogram(path, sino)
    back = read_sinogram(path)
    assert back.grid == sino.grid and np.array_equal(back.values, sino.values)
    assert np.array_equal(back.row_lo, sino.row_lo) and back.provenance == sino.provenance
    assert write_sinogram(tmp_path / "t.bin", back) == digest
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheIntegrityError, match="checksum"):
        read_sinogram(path)
    (tmp_path / "t.bin.json").unlink()
    with pytest.raises(CacheIntegrityError, match="manifest"):
        read_sinogram(tmp_path / "t.bin")
