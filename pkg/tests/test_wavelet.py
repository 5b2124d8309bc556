#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from src.core.errors import UnsupportedError, ValidationError
from src.core.lattice import preset
from src.core.mask import bspline_mask, univariate_bspline_mask
from src.core.ortho import CoeffField, TrigPoly, orthogonalize, phi_coeffs
from src.core.refine import build_evaluator
from src.core.wavelet import (annulus_zero_free, decay_certificate, eval_wavelet, find_q, tail_bounds, tail_table,
                              truncate_coeffs, verify_qmf, wavelet_coeffs, wavelet_values)


@pytest.mark.parametrize("q,m,index,expected,tol", [
    (0.7, 22, 1, 0.00375, 2e-5),
    (0.7, 30, 1, 0.00025, 2e-5),
    (0.7, 32, 0, 0.0036, 2e-4),
    (0.85, 53, 1, 0.0044, 2e-4),
])
def test_tail_bounds_match_published_tables(q, m, index, expected, tol):
    assert tail_bounds(q, 1.0, m)[index] == pytest.approx(expected, abs=tol)


def test_tail_table_is_decreasing():
    rows = tail_table(0.7)
    assert [r[0] for r in rows] == [1, 10, 20, 30, 40, 50, 60]
    for (_, h1a, h2a), (_, h1b, h2b) in zip(rows, rows[1:]):
        assert h1b < h1a
        assert h2b < h2a


@pytest.mark.parametrize("q,C", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
def test_tail_bounds_reject_bad_parameters(q, C):
    with pytest.raises(ValidationError):
        tail_bounds(q, C, 10)


def _synthetic_field() -> CoeffField:
    return CoeffField({(0, 0): 1.0, (1, 0): 0.1, (0, 1): 0.01, (1, 1): 0.001})


def test_truncation_l1():
    kept = truncate_coeffs(_synthetic_field(), 0.02, norm="l1")
    assert set(kept.coeffs) == {(0, 0), (1, 0)}
    assert kept.meta["removed"] == pytest.approx(0.011)
    assert kept.norm_tail == pytest.approx(0.011)


def test_truncation_l2():
    kept = truncate_coeffs(_synthetic_field(), 0.0101, norm="l2")
    assert set(kept.coeffs) == {(0, 0), (1, 0)}
    assert kept.meta["removed"] == pytest.approx(np.sqrt(0.01 ** 2 + 0.001 ** 2))


def test_truncation_window_and_zero_budget():
    assert truncate_coeffs(_synthetic_field(), 0.0).size == 4
    kept = truncate_coeffs(_synthetic_field(), 0.0, m_cut=1)
    assert set(kept.coeffs) == {(0, 0), (1, 0), (0, 1)}
    with pytest.raises(ValidationError):
        truncate_coeffs(_synthetic_field(), 0.01, norm="max")


def test_truncation_adds_tail_certificate():
    kept = truncate_coeffs(_synthetic_field(), 0.0, norm="l2", m_cut=22, q=0.7)
    assert kept.norm_tail == pytest.approx(tail_bounds(0.7, 1.0, 22)[1])


@pytest.mark.parametrize("name,v,shift,rule", [
    ("bear", (-0.5, 0.5), (0, 1), "(-1)^(k1+k2)"),
    ("square", (-0.5, 0.0), (1, 0), "(-1)^(k1)"),
    ("dragon", (0.5, 0.5), (0, 1), "(-1)^(k1+k2)"),
])
def test_wavelet_sign_rules(name, v, shift, rule):
    M, _ = preset(name)
    ws = wavelet_coeffs(CoeffField({(0, 0): 2.0, (1, 0): 1.0, (1, 1): 0.5}), M)
    assert ws.v == pytest.approx(v)
    assert ws.shift == shift
    assert ws.sign_rule == rule
    assert ws.psi.get((0, 0)) == 2.0
    assert ws.psi.get((1, 0)) == -1.0
    assert ws.psi.get((1, 1)) == (0.5 if rule.endswith("k2)") else -0.5)


def test_bear_uses_u_zero_one(bear):
    ws = wavelet_coeffs(CoeffField({(0, 0): 1.0}), bear[0])
    assert ws.u == (0, 1)


def test_unsupported_cases():
    M, _ = preset("example2")
    with pytest.raises(UnsupportedError):
        wavelet_coeffs(CoeffField({(0, 0): 3.0}), M)
    hat = univariate_bspline_mask(1)
    with pytest.raises(UnsupportedError):
        find_q(phi_coeffs(hat), hat.M)


@pytest.fixture(scope="module")
def hat_system():
    mask = univariate_bspline_mask(1)
    _, b, c1 = orthogonalize(mask)
    ws = wavelet_coeffs(c1, mask.M, inv_sqrt=b)
    tf, v = build_evaluator(mask)
    return ws, tf, v


def test_hat_wavelet_is_quadrature_mirror(hat_system):
    ws, _, _ = hat_system
    assert ws.v == pytest.approx((0.5,))
    assert ws.shift == (1,)
    dev1, dev2 = verify_qmf(ws)
    assert dev1 <= 1e-9
    assert dev2 <= 1e-9


def test_hat_wavelet_has_zero_mean(hat_system):
    ws, tf, v = hat_system
    lf = wavelet_values(ws, tf, v, 8)
    assert lf.depth == 8
    assert lf.values.sum() * 2.0 ** -8 == pytest.approx(0.0, abs=1e-5)
    assert np.abs(lf.values).max() > 0.5
    row = lf.size // 2
    x = lf.positions()[row]
    assert eval_wavelet(ws, tf, v, x, 8, values=lf) == lf.values[row]


def test_wavelet_values_need_inverse_root(hat_system):
    ws, tf, v = hat_system
    bare = wavelet_coeffs(ws.phi1, ws.M)
    with pytest.raises(ValidationError):
        wavelet_values(bare, tf, v, 4)


def test_decay_certificate_holds(hat_system):
    ws, _, _ = hat_system
    field = decay_certificate(CoeffField(dict(ws.phi1.coeffs)), 0.3)
    assert field.q == 0.3
    assert field.decay_violations(0.3, field.C) == []


def test_find_q_without_zeros():
    # Φ ≡ 1 时没有零点，q 停在网格下限
    M, _ = preset("bear")
    flat = TrigPoly({(0, 0): 1.0}, 2)
    assert find_q(flat, M, radii=8, angles=32) == pytest.approx(0.005)
    assert annulus_zero_free(flat, M, 0.005, radii=8, angles=32)


def test_zero_on_torus_is_detected():
    # Φ(Mᵀξ) 化为 1 − z₁z₂，在单位环面上为零
    M = preset("bear")[0]
    poly = TrigPoly({(0, 0): 1.0, (1, 0): -1.0}, 2)
    assert not annulus_zero_free(poly, M, 0.9, radii=8, angles=64)


@pytest.mark.slow
@pytest.mark.parametrize("order,published,lo", [(1, 0.70, 0.6), (3, 0.85, 0.78)])
def test_find_q_for_bear(bear, order, published, lo):
    # 给出的 q 只是可行值；最小可行 q 不超过它，且该值本身通过无零点检验
    mask = bspline_mask(*bear, order)
    phi = phi_coeffs(mask)
    q = find_q(phi, mask.M)
    assert lo <= q <= published
    assert annulus_zero_free(phi, mask.M, published, radii=32, angles=256)


@pytest.mark.slow
@pytest.mark.parametrize("norm,m_cut,expected", [("l2", 22, 65), ("l1", 32, 149)])
def test_bear_truncation_counts(bear, norm, m_cut, expected):
    mask = bspline_mask(*bear, 1)
    _, b, c1 = orthogonalize(mask)
    ws = wavelet_coeffs(c1, mask.M, inv_sqrt=b)
    kept = truncate_coeffs(ws.psi, 0.005, norm=norm, m_cut=m_cut)
    assert abs(kept.size - expected) <= 3


@pytest.mark.slow
@pytest.mark.parametrize("order", [1, 3])
def test_bear_wavelet_is_quadrature_mirror(bear, order):
    mask = bspline_mask(*bear, order)
    _, b, c1 = orthogonalize(mask)
    dev1, dev2 = verify_qmf(wavelet_coeffs(c1, mask.M, inv_sqrt=b))
    assert dev1 <= 1e-6
    assert dev2 <= 1e-6
