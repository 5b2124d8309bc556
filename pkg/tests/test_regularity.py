#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from src.core.errors import BudgetExceededError, ValidationError
from src.core.lattice import preset
from src.core.mask import bspline_mask, univariate_bspline_mask
from src.core.refine import transition_family
from src.core.regularity import (RestrictedPair, candidate_norms, holder_C, holder_L2, jsr_bracket,
                                 l2_radius, regularity_table, restrict_to_Wk, restricted_pair_for)


def _generic_pair(n: int = 4, seed: int = 5) -> RestrictedPair:
    rng = np.random.default_rng(seed)
    return RestrictedPair.from_matrices(rng.normal(size=(n, n)) / n, rng.normal(size=(n, n)) / n)


def test_hat_restriction():
    mask = univariate_bspline_mask(1)
    pair = restrict_to_Wk(transition_family(mask, mask.basis_digits()))
    assert pair.k == 0
    assert pair.dim == 1
    np.testing.assert_allclose(pair.mats.ravel(), [0.5, 0.5], atol=1e-14)


@pytest.mark.parametrize("n,alpha", [(1, 1.0), (2, 2.0), (3, 3.0)])
def test_univariate_holder_is_exact(n, alpha):
    est = holder_C(univariate_bspline_mask(n), depth=6)
    assert est.lower == pytest.approx(alpha, abs=1e-9)
    assert est.upper == pytest.approx(alpha, abs=1e-9)
    assert est.k == n - 1


def test_l2_radius_matches_kronecker_eigenvalue():
    pair = _generic_pair()
    kron = (np.kron(pair.A0, pair.A0) + np.kron(pair.A1, pair.A1)) / 2
    expected = np.sqrt(np.max(np.abs(np.linalg.eigvals(kron))))
    assert l2_radius(pair) == pytest.approx(expected, rel=1e-8)


def _averaged_norms(pair: RestrictedPair, s: int) -> float:
    """(1/m^s) Σ_{|σ|=s} ‖A_σ‖_F²，逐个乘积枚举"""
    products = pair.mats.copy()
    for _ in range(s - 1):
        products = np.concatenate([products @ A for A in pair.mats], axis=0)
    return float(np.sum(products ** 2)) / pair.m ** s


def test_l2_radius_matches_product_average():
    pair = _generic_pair(seed=7)
    ratio = _averaged_norms(pair, 16) / _averaged_norms(pair, 15)
    assert l2_radius(pair) == pytest.approx(np.sqrt(ratio), rel=1e-3)


def test_l2_radius_of_restricted_bear_pair(bear):
    pair, _ = restricted_pair_for(bspline_mask(*bear, 1), 12)
    ratio = _averaged_norms(pair, 16) / _averaged_norms(pair, 15)
    assert l2_radius(pair) == pytest.approx(np.sqrt(ratio), rel=2e-2)


def test_l2_radius_of_diagonal_pair():
    pair = RestrictedPair.from_matrices(np.diag([0.9, 0.2]), np.diag([0.1, 0.7]))
    expected = np.sqrt(max((0.81 + 0.01) / 2, (0.04 + 0.49) / 2))
    assert l2_radius(pair) == pytest.approx(expected, rel=1e-10)


def test_scale_invariance():
    pair = _generic_pair()
    assert l2_radius(pair.scaled(3.0)) == pytest.approx(3.0 * l2_radius(pair), rel=1e-9)
    b1 = jsr_bracket(pair, 6)
    b3 = jsr_bracket(pair.scaled(3.0), 6)
    assert b3.lower == pytest.approx(3.0 * b1.lower, rel=1e-9)
    assert b3.upper == pytest.approx(3.0 * b1.upper, rel=1e-6)


def test_jsr_bracket_ordering_and_diagonal_case():
    pair = _generic_pair(seed=11)
    for t in (1, 4, 8):
        b = jsr_bracket(pair, t)
        assert b.lower <= b.upper
    diag = RestrictedPair.from_matrices(np.diag([0.9, 0.2]), np.diag([0.1, 0.7]))
    b = jsr_bracket(diag, 5)
    assert b.lower == pytest.approx(0.9)
    assert b.upper == pytest.approx(0.9)


def test_jsr_guards():
    pair = _generic_pair()
    with pytest.raises(ValidationError):
        jsr_bracket(pair, 0)
    with pytest.raises(BudgetExceededError):
        jsr_bracket(pair, 40)


def test_candidate_norms_include_euclidean():
    names = [name for name, _ in candidate_norms(_generic_pair())]
    assert names[:2] == ["euclidean", "balanced"]


def test_bear_bracket_contains_known_value(bear):
    est = holder_C(bspline_mask(*bear, 1), depth=8, omega_depth=12)
    assert est.contains(0.7892, slack=1e-4)
    assert est.lower <= est.upper


def test_dragon_bracket_contains_known_value(dragon):
    est = holder_C(bspline_mask(*dragon, 1), depth=8, omega_depth=12)
    assert est.contains(0.47637, slack=1e-5)


def test_square_indicator_uses_constant_complement(square):
    # Ω 很小时高阶 W_j 会平凡不变，k 不能超过和规则阶数
    pair, route = restricted_pair_for(bspline_mask(*square, 0), 14)
    assert pair.k == 0
    assert route == "reflected"
    assert holder_L2(bspline_mask(*square, 0)) == pytest.approx(0.5, abs=1e-6)


def test_square_hat_stops_at_sum_rules(square):
    pair, _ = restricted_pair_for(bspline_mask(*square, 1), 14)
    assert pair.k == 1
    assert holder_L2(bspline_mask(*square, 1)) == pytest.approx(1.5, abs=1e-6)


@pytest.mark.slow
def test_l2_table_square():
    M, D = preset("square")
    rows = regularity_table(M, D, range(5), with_c=False)
    for row, expected in zip(rows, [0.5, 1.5, 2.5, 3.5, 4.5]):
        assert row["alpha_L2"] == pytest.approx(expected, abs=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("name,expected", [
    ("dragon", [0.2382, 1.0962, 1.8039, 2.4395, 3.0557]),
    ("bear", [0.3946, 1.5372, 2.6323, 3.7092, 4.7668]),
])
def test_l2_table(name, expected):
    M, D = preset(name)
    for n, value in enumerate(expected):
        assert holder_L2(bspline_mask(M, D, n)) == pytest.approx(value, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3])
def test_square_holder_brackets(square, n):
    est = holder_C(bspline_mask(*square, n), depth=14)
    assert est.contains(float(n), slack=1e-9)
    assert est.upper - est.lower <= 0.05


@pytest.mark.slow
@pytest.mark.parametrize("name,expected", [
    ("dragon", [0.47637, 1.5584, 2.1924]),
    ("bear", [0.7892, 2.2349, 3.0744]),
])
def test_holder_brackets(name, expected):
    M, D = preset(name)
    for n, value in enumerate(expected, start=1):
        est = holder_C(bspline_mask(M, D, n), depth=14)
        assert est.contains(value, slack=1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("n,smoothness", [(2, 2.0), (3, 3.0)])
def test_bear_lower_bound_certifies_smoothness(bear, n, smoothness):
    # B₂ ∈ C²，B₃ ∈ C³：区间下端本身就要越过整数
    est = holder_C(bspline_mask(*bear, n), depth=16)
    assert est.lower > smoothness
