#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from src.core.errors import DigitSetError, DimensionError, ValidationError
from src.core.lattice import (DigitSet, DilationMatrix, canonical_digits, coset_index, coset_keys,
                              dual_digits, is_expanding, is_isotropic, peel, preset, preset_names,
                              register_preset)


def test_square_matrix_exact_inverse(square):
    M, _ = square
    assert M.det == 2
    assert M.adjugate == ((0, 2), (-1, 0))
    np.testing.assert_array_equal(M.inverse @ M.array, np.eye(2))


@pytest.mark.parametrize("rows", [[[1, 2, 3], [4, 5, 6]], [[1, 0], [0, 1]], [[2, 0], [0, 1]]])
def test_rejects_bad_matrices(rows):
    with pytest.raises(ValidationError):
        DilationMatrix.from_rows(rows)


def test_non_square_is_dimension_error():
    with pytest.raises(DimensionError):
        DilationMatrix.from_rows([[1, 2, 3], [4, 5, 6]])


def test_digit_validation(bear):
    M, _ = bear
    # (2, 0) = M·(0, -1)，与 0 同余
    with pytest.raises(DigitSetError):
        DigitSet.for_matrix(M, [[0, 0], [2, 0]])
    with pytest.raises(DigitSetError):
        DigitSet.for_matrix(M, [[0, 0]])
    with pytest.raises(DigitSetError):
        DigitSet.for_matrix(M, [[1, 0], [0, 0]])


def test_coset_keys_are_shift_invariant(bear):
    M, D = bear
    rng = np.random.default_rng(0)
    ks = rng.integers(-50, 50, size=(200, 2))
    zs = rng.integers(-20, 20, size=(200, 2))
    np.testing.assert_array_equal(coset_keys(M, ks), coset_keys(M, ks + zs @ M.array.T))
    assert coset_index(M, D, [0, 0]) == 0
    assert coset_index(M, D, [1, 0]) == 1


@pytest.mark.parametrize("name", ["square", "dragon", "bear", "example2"])
def test_peel_reconstructs_indices(name):
    M, D = preset(name)
    p = 5
    rng = np.random.default_rng(1)
    ks = rng.integers(-100, 100, size=(300, M.dim))
    cells, idx = peel(M, D, ks, p)
    rebuilt = cells @ M.power(p).T
    for i in range(p):
        rebuilt = rebuilt + D.array[idx[:, i]] @ M.power(i).T
    np.testing.assert_array_equal(rebuilt, ks)


def test_canonical_and_dual_digits(bear):
    M, _ = bear
    D = canonical_digits(M)
    assert D.digits[0] == (0, 0)
    assert D.size == 2
    assert dual_digits(M).digits == ((0, 0), (0, 1))


def test_isotropy():
    assert is_isotropic(preset("square")[0])
    assert is_isotropic(preset("dragon")[0])
    assert not is_isotropic(DilationMatrix.from_rows([[2, 1], [0, 3]]))


def test_presets_and_registration():
    assert {"square", "dragon", "bear", "example2", "unit1d"} <= set(preset_names())
    with pytest.raises(ValidationError):
        preset("nope")
    register_preset("twice", [[2, 0], [0, 2]], [[0, 0], [1, 0], [0, 1], [1, 1]])
    M, D = preset("twice")
    assert M.det_abs == 4 and D.size == 4


def test_is_expanding(bear):
    assert is_expanding(bear[0])
    assert is_expanding([[2, 1], [0, 3]])
    assert not is_expanding([[1, 1], [0, 2]])
