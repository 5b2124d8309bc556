#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import pytest
from scipy.integrate import quad

from src.core.errors import RieszFailureError, ValidationError
from src.core.mask import bspline_mask, univariate_bspline_mask
from src.core.ortho import (TrigPoly, gram_check, inv_sqrt_fourier, ortho_mask, orthogonalize,
                            orthogonalized_values, phi_coeffs, riesz_bounds, shift_inner_products)
from src.core.refine import build_evaluator, refine_values


def test_hat_phi_polynomial():
    phi = phi_coeffs(univariate_bspline_mask(1))
    assert {k for k, c in phi.coeffs.items() if abs(c) > 1e-12} == {(-1,), (0,), (1,)}
    assert phi.coeffs[(0,)] == pytest.approx(2 / 3, abs=1e-12)
    assert phi.coeffs[(1,)] == pytest.approx(1 / 6, abs=1e-12)
    assert phi.symmetry_defect() < 1e-12
    lo, hi = riesz_bounds(phi)
    assert lo == pytest.approx(1 / 3, abs=1e-12)
    assert hi == pytest.approx(1.0, abs=1e-12)


def test_tile_indicator_is_orthonormal(square):
    mask = bspline_mask(*square, 0)
    phi = phi_coeffs(mask)
    assert {k for k, c in phi.coeffs.items() if abs(c) > 1e-12} == {(0, 0)}
    assert phi.coeffs[(0, 0)] == pytest.approx(1.0)
    b = inv_sqrt_fourier(phi, 64)
    assert b.coeffs == pytest.approx({(0, 0): 1.0})
    c1 = ortho_mask(mask, phi, 64)
    assert c1.coeffs == pytest.approx({k: float(c) for k, c in mask.coeffs.items()})


def test_hat_inverse_root_coefficients():
    phi = phi_coeffs(univariate_bspline_mask(1))
    b = inv_sqrt_fourier(phi, 4096)
    expected, _ = quad(lambda t: 1.0 / np.sqrt((2.0 + np.cos(2 * np.pi * t)) / 3.0), 0.0, 1.0, epsabs=1e-13)
    assert b.get(0) == pytest.approx(expected, abs=1e-10)
    assert b.get(0) == pytest.approx(1.2916, abs=1e-4)
    assert b.total() == pytest.approx(1.0, abs=1e-10)
    for k in range(1, 6):
        assert b.get(k) == pytest.approx(b.get(-k), abs=1e-13)
    assert gram_check(b, phi) < 1e-10


def test_doubling_grid_keeps_coefficients():
    phi = phi_coeffs(univariate_bspline_mask(1))
    coarse = inv_sqrt_fourier(phi, 1024)
    fine = inv_sqrt_fourier(phi, 2048)
    for k, c in coarse.coeffs.items():
        assert fine.get(k) == pytest.approx(c, abs=1e-12)


def test_decay_certificate_is_fitted():
    phi = phi_coeffs(univariate_bspline_mask(1))
    b = inv_sqrt_fourier(phi, 512, q=0.3)
    assert b.C > 0
    assert b.decay_violations(b.q, b.C) == []
    assert b.aliasing < 1e-50


def test_bad_grid_and_riesz_failure():
    phi = TrigPoly({(-1,): 0.5, (0,): 1.0, (1,): 0.5}, 1)
    with pytest.raises(ValidationError):
        inv_sqrt_fourier(phi, 100)
    with pytest.raises(RieszFailureError):
        inv_sqrt_fourier(phi, 64)


def test_orthogonalized_mask_sums_to_m():
    mask = univariate_bspline_mask(1)
    phi, b, c1 = orthogonalize(mask)
    assert b.meta["grid"] == 4096
    assert c1.total() == pytest.approx(2.0, abs=1e-10)
    assert c1.get(0) == pytest.approx(c1.get(2), abs=1e-12)


def test_shift_orthonormality_in_physical_space():
    mask = univariate_bspline_mask(1)
    _, b, _ = orthogonalize(mask)
    tf, v = build_evaluator(mask)
    phi1 = orthogonalized_values(tf, v, b, 8)
    products = shift_inner_products(phi1, [[0], [1], [2], [3]])
    assert products[(0,)] == pytest.approx(1.0, abs=1e-3)
    for j in (1, 2, 3):
        assert products[(j,)] == pytest.approx(0.0, abs=1e-3)


def test_bear_gram_check(bear):
    mask = bspline_mask(*bear, 1)
    phi, b, _ = orthogonalize(mask, N=256)
    assert phi.symmetry_defect() < 1e-12
    assert riesz_bounds(phi)[0] > 0.0
    assert gram_check(b, phi) <= 1e-6


def test_bear_phi_matches_quadrature(bear):
    # Φ_k = (φ, φ(· + k))，与深度 12 格点上的黎曼和比较
    mask = bspline_mask(*bear, 1)
    phi = phi_coeffs(mask)
    tf, v = build_evaluator(mask)
    shifts = [(0, 0), (1, 0), (0, 1), (1, 1)]
    products = shift_inner_products(refine_values(tf, v, 12), shifts)
    for k in shifts:
        assert phi.coeffs.get(k, 0.0) == pytest.approx(products[k], abs=1e-2)
    assert sum(phi.coeffs.values()) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("order,expected", [
    (1, {(1, 0): 1.15586, (0, 0): 0.55632, (3, 0): -0.09441, (4, 0): -0.06459, (1, 1): 0.06225,
         (3, 1): -0.04478, (3, -1): -0.03976, (-3, 0): 0.01911, (5, 1): 0.01591, (4, -1): 0.01557}),
    (3, {(2, 0): 1.08200, (1, 0): 0.60379, (5, 0): -0.13271, (2, -1): 0.08179, (0, -1): -0.06971,
         (0, 1): -0.06948, (4, 0): -0.06578, (6, -1): 0.04453}),
])
def test_bear_orthogonalized_coefficients(bear, order, expected):
    _, _, c1 = orthogonalize(bspline_mask(*bear, order))
    for k, value in expected.items():
        assert c1.get(k) == pytest.approx(value, abs=5e-3)
