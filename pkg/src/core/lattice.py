#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
整数格运算模块
负责扩张矩阵、陪集 Z^d/MZ^d 与数字集；陪集判定全部用整数伴随矩阵精确完成
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DigitSetError, DimensionError, ValidationError

Vector = Tuple[int, ...]

EXPANDING_TOL = 1e-9


def _as_int_rows(rows) -> Tuple[Tuple[int, ...], ...]:
    """把任意二维输入转成整数元组，非方阵报维数错误"""
    arr = np.asarray(rows)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"矩阵必须是非空方阵，实际形状 {arr.shape}")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValidationError("矩阵元素必须是整数")
    return tuple(tuple(int(x) for x in row) for row in arr.tolist())


def _exact_inverse(rows: Sequence[Sequence[int]]) -> Tuple[Fraction, List[List[Fraction]]]:
    """有理数高斯消元，返回 (det, inverse)"""
    d = len(rows)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(d)]
         for i, row in enumerate(rows)]
    det = Fraction(1)
    for col in range(d):
        pivot = next((r for r in range(col, d) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0), []
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv_p = 1 / a[col][col]
        a[col] = [x * inv_p for x in a[col]]
        for r in range(d):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det, [row[d:] for row in a]


@dataclass(frozen=True)
class DilationMatrix:
    """整数扩张矩阵 M，m = |det M| ≥ 2"""

    entries: Tuple[Tuple[int, ...], ...]
    det: int = field(init=False, compare=False)
    adjugate: Tuple[Tuple[int, ...], ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        rows = _as_int_rows(self.entries)
        object.__setattr__(self, "entries", rows)
        det, inv = _exact_inverse(rows)
        if det.denominator != 1:
            raise ValidationError("行列式计算异常")
        det = int(det)
        if abs(det) < 2:
            raise ValidationError(f"|det M| 必须 ≥ 2，实际为 {abs(det)}")
        if not is_expanding(rows):
            raise ValidationError(f"矩阵不是扩张的: {rows}")
        adj = tuple(tuple(int(det * x) for x in row) for row in inv)
        object.__setattr__(self, "det", det)
        object.__setattr__(self, "adjugate", adj)

    @classmethod
    def from_rows(cls, rows) -> "DilationMatrix":
        return cls(_as_int_rows(rows))

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def det_abs(self) -> int:
        return abs(self.det)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    @property
    def adj_array(self) -> np.ndarray:
        return np.array(self.adjugate, dtype=np.int64)

    @property
    def inverse(self) -> np.ndarray:
        return self.adj_array.astype(float) / self.det

    @property
    def transpose(self) -> "DilationMatrix":
        return DilationMatrix(tuple(zip(*self.entries)))

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.array.astype(float)))))

    def power(self, p: int) -> np.ndarray:
        """M^p（整数），p ≥ 0"""
        return np.linalg.matrix_power(self.array, p)

    def inverse_power(self, p: int) -> np.ndarray:
        return np.linalg.matrix_power(self.inverse, p)

    def to_list(self) -> List[List[int]]:
        return [list(row) for row in self.entries]


@dataclass(frozen=True)
class DigitSet:
    """数字集 D(M)：m 个两两不同余的代表元，首元为 0"""

    digits: Tuple[Vector, ...]

    def __post_init__(self):
        digits = tuple(tuple(int(x) for x in np.atleast_1d(d).tolist()) for d in self.digits)
        object.__setattr__(self, "digits", digits)

    @classmethod
    def for_matrix(cls, M: DilationMatrix, digits: Iterable) -> "DigitSet":
        """构造并按 M 校验"""
        ds = cls(tuple(digits))
        validate_digits(M, ds)
        return ds

    @property
    def size(self) -> int:
        return len(self.digits)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.digits, dtype=np.int64).reshape(len(self.digits), -1)

    def negated(self) -> "DigitSet":
        return DigitSet(tuple(tuple(-x for x in d) for d in self.digits))

    def to_list(self) -> List[List[int]]:
        return [list(d) for d in self.digits]

    def __len__(self) -> int:
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)


def is_expanding(M) -> bool:
    """所有特征值模长都大于 1 + 1e-9"""
    rows = M.entries if isinstance(M, DilationMatrix) else _as_int_rows(M)
    eig = np.linalg.eigvals(np.array(rows, dtype=float))
    return bool(np.all(np.abs(eig) > 1.0 + EXPANDING_TOL))


def is_isotropic(M: DilationMatrix, tol: float = 1e-9) -> bool:
    """可对角化且特征值模长全部相等"""
    eigvals, eigvecs = np.linalg.eig(M.array.astype(float))
    mods = np.abs(eigvals)
    if np.max(mods) - np.min(mods) > tol * np.max(mods):
        return False
    return bool(np.linalg.cond(eigvecs) < 1e8)


def coset_keys(M: DilationMatrix, ks) -> np.ndarray:
    """陪集键 adj(M)·k mod |det M|；两向量同余当且仅当键相同"""
    ks = np.asarray(ks, dtype=np.int64).reshape(-1, M.dim)
    return np.mod(ks @ M.adj_array.T, M.det_abs)


def _encode(keys: np.ndarray, m: int) -> np.ndarray:
    weights = m ** np.arange(keys.shape[1], dtype=np.int64)
    return keys @ weights


class _CosetTable:
    """键到数字下标的查找表"""

    def __init__(self, M: DilationMatrix, D: DigitSet):
        self.M = M
        self.m = M.det_abs
        codes = _encode(coset_keys(M, D.array), self.m)
        self.size = self.m ** M.dim
        self.table: Optional[np.ndarray] = None
        self.mapping: Dict[int, int] = {int(c): i for i, c in enumerate(codes)}
        if self.size <= 10_000_000:
            self.table = np.full(self.size, -1, dtype=np.int64)
            self.table[codes] = np.arange(len(codes))

    def lookup(self, ks: np.ndarray) -> np.ndarray:
        codes = _encode(coset_keys(self.M, ks), self.m)
        if self.table is not None:
            return self.table[codes]
        return np.array([self.mapping.get(int(c), -1) for c in codes], dtype=np.int64)


def validate_digits(M: DilationMatrix, D: DigitSet) -> None:
    if any(len(d) != M.dim for d in D.digits):
        raise DigitSetError("数字维数与矩阵不一致")
    if D.size != M.det_abs:
        raise DigitSetError(f"数字个数应为 {M.det_abs}，实际为 {D.size}")
    if any(x != 0 for x in D.digits[0]):
        raise DigitSetError("第一个数字必须是 0")
    codes = _encode(coset_keys(M, D.array), M.det_abs)
    if len(set(codes.tolist())) != D.size:
        raise DigitSetError("数字之间存在模 MZ^d 同余")


def coset_indices(M: DilationMatrix, D: DigitSet, ks) -> np.ndarray:
    """批量陪集下标"""
    ks = np.asarray(ks, dtype=np.int64).reshape(-1, M.dim)
    idx = _CosetTable(M, D).lookup(ks)
    if np.any(idx < 0):
        raise DigitSetError("存在不属于任何数字陪集的向量，数字集不完整")
    return idx


def coset_index(M: DilationMatrix, D: DigitSet, k) -> int:
    """返回 i 使 k ≡ digits[i] (mod MZ^d)"""
    return int(coset_indices(M, D, np.atleast_1d(k))[0])


def peel(M: DilationMatrix, D: DigitSet, ks, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    逐位剥离 p 个 M 进制数字：k = M^p a + Σ_{i<p} M^i Δ_i
    返回 (a, digit_indices)，digit_indices[:, i] 是第 i 位（最低位在前）
    """
    ks = np.array(ks, dtype=np.int64).reshape(-1, M.dim)
    table = _CosetTable(M, D)
    adj_t = M.adj_array.T
    digits = D.array
    out = np.empty((ks.shape[0], p), dtype=np.int64)
    for i in range(p):
        idx = table.lookup(ks)
        out[:, i] = idx
        # 精确整除：adj(M)(k − Δ) = det · M^{-1}(k − Δ)
        ks = ((ks - digits[idx]) @ adj_t) // M.det
    return ks, out


def canonical_digits(M: DilationMatrix) -> DigitSet:
    """每个陪集取最小 sup 范数代表元，平局时先非负再字典序"""
    d = M.dim
    bound = int(np.max(np.sum(np.abs(M.array), axis=1))) * d
    box = np.array(list(product(range(-bound, bound + 1), repeat=d)), dtype=np.int64)
    order = sorted(range(len(box)), key=lambda i: (int(np.max(np.abs(box[i]))),
                                                   int(np.sum(box[i] < 0)),
                                                   tuple(box[i].tolist())))
    codes = _encode(coset_keys(M, box), M.det_abs)
    chosen: Dict[int, Vector] = {}
    for i in order:
        c = int(codes[i])
        if c not in chosen:
            chosen[c] = tuple(int(x) for x in box[i])
            if len(chosen) == M.det_abs:
                break
    if len(chosen) != M.det_abs:
        raise DigitSetError("枚举范围内未找到全部陪集代表元")
    return DigitSet(tuple(chosen.values()))


def dual_digits(M: DilationMatrix) -> DigitSet:
    """Mᵀ 的数字集 D_*"""
    return canonical_digits(M.transpose)


# 内置预设：名称 -> (矩阵, 数字)
_PRESETS: Dict[str, Tuple[List[List[int]], List[List[int]]]] = {
    "square": ([[0, -2], [1, 0]], [[0, 0], [1, 0]]),
    "dragon": ([[1, 1], [-1, 1]], [[0, 0], [1, 0]]),
    "bear": ([[1, -2], [1, 0]], [[0, 0], [1, 0]]),
    "example2": ([[1, 2], [1, -1]], [[0, 0], [1, 0], [0, 1]]),
    "unit1d": ([[2]], [[0], [1]]),
}


def register_preset(name: str, matrix, digits) -> None:
    """注册预设（先校验）"""
    M = DilationMatrix.from_rows(matrix)
    DigitSet.for_matrix(M, digits)
    _PRESETS[name.lower()] = ([list(r) for r in M.entries], [list(np.atleast_1d(x)) for x in digits])


def preset_names() -> List[str]:
    return sorted(_PRESETS)


def preset(name: str) -> Tuple[DilationMatrix, DigitSet]:
    key = name.lower()
    if key not in _PRESETS:
        raise ValidationError(f"未知预设: {name}（可选: {', '.join(preset_names())}）")
    rows, digits = _PRESETS[key]
    M = DilationMatrix.from_rows(rows)
    return M, DigitSet.for_matrix(M, digits)
