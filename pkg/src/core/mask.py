#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
细分掩模模块
瓦片 B 样条掩模、对称化、符号求值、和规则阶数；系数内部一律用有理数保存
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import comb
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ValidationError
from .lattice import DigitSet, DilationMatrix, Vector, dual_digits, validate_digits

SUM_TOL = 1e-9


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(str(value))


@dataclass(frozen=True)
class Mask:
    """有限支撑的细分系数 c_k，Σ c_k = m"""

    M: DilationMatrix
    coeffs: Dict[Vector, Fraction]
    order: Optional[int] = None
    digits: Optional[DigitSet] = field(default=None, compare=False)
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        d = self.M.dim
        clean: Dict[Vector, Fraction] = {}
        for k, c in self.coeffs.items():
            key = tuple(int(x) for x in np.atleast_1d(k))
            if len(key) != d:
                raise ValidationError(f"系数下标 {key} 的维数与矩阵不一致")
            value = _to_fraction(c)
            if value != 0:
                clean[key] = clean.get(key, Fraction(0)) + value
        if not clean:
            raise ValidationError("掩模系数全为零")
        total = sum(clean.values())
        if abs(float(total) - self.M.det_abs) > SUM_TOL * self.M.det_abs:
            raise ValidationError(f"系数之和应为 {self.M.det_abs}，实际为 {float(total)}")
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))
        if self.digits is not None:
            validate_digits(self.M, self.digits)

    @property
    def dim(self) -> int:
        return self.M.dim

    @property
    def m(self) -> int:
        return self.M.det_abs

    @property
    def support(self) -> np.ndarray:
        return np.array(list(self.coeffs.keys()), dtype=np.int64).reshape(-1, self.dim)

    @property
    def values(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs.values()])

    def coefficient(self, k) -> Fraction:
        return self.coeffs.get(tuple(int(x) for x in np.atleast_1d(k)), Fraction(0))

    def basis_digits(self) -> DigitSet:
        """生成瓦片的数字集；未记录时用规范数字"""
        if self.digits is not None:
            return self.digits
        from .lattice import canonical_digits
        return canonical_digits(self.M)

    def cache_payload(self) -> Dict[str, Any]:
        return {
            "matrix": self.M.to_list(),
            "coeffs": [[list(k), str(c)] for k, c in self.coeffs.items()],
        }

    def with_order(self, order: Optional[int], name: Optional[str] = None) -> "Mask":
        return Mask(self.M, self.coeffs, order, self.digits, name or self.name)


def _convolve(a: Dict[Vector, Any], b: Dict[Vector, Any]) -> Dict[Vector, Any]:
    out: Dict[Vector, Any] = {}
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, 0) + ca * cb
    return out


def bspline_mask(M: DilationMatrix, D: DigitSet, n: int) -> Mask:
    """
    B_n 的掩模：C_k 为 n+1 个数字之和等于 k 的有序组数，c_k = m^{-n} C_k
    通过 n 次支撑卷积计数
    """
    if n < 0:
        raise ValidationError("阶数 n 必须非负")
    validate_digits(M, D)
    indicator = {d: 1 for d in D.digits}
    counts: Dict[Vector, int] = dict(indicator)
    for _ in range(n):
        counts = _convolve(counts, indicator)
    scale = Fraction(1, M.det_abs ** n)
    return Mask(M, {k: scale * v for k, v in counts.items()}, order=n, digits=D)


def univariate_bspline_mask(n: int) -> Mask:
    """经典一元 B 样条，M = 2，c_k = 2^{-n} C(n+1, k)"""
    M = DilationMatrix.from_rows([[2]])
    D = DigitSet.for_matrix(M, [[0], [1]])
    coeffs = {(k,): Fraction(comb(n + 1, k), 2 ** n) for k in range(n + 2)}
    return Mask(M, coeffs, order=n, digits=D, name=f"univariate-B{n}")


def tensor_bspline_mask(n: int, d: int = 2) -> Mask:
    """经典 d 元张量积 B 样条，M = 2I，共 (n+2)^d 个系数"""
    M = DilationMatrix.from_rows((2 * np.eye(d, dtype=int)).tolist())
    D = DigitSet.for_matrix(M, [list(v) for v in product((0, 1), repeat=d)])
    one = [Fraction(comb(n + 1, k), 2 ** n) for k in range(n + 2)]
    coeffs = {}
    for k in product(range(n + 2), repeat=d):
        c = Fraction(1)
        for i in k:
            c *= one[i]
        coeffs[k] = c
    return Mask(M, coeffs, order=n, digits=D, name=f"tensor-B{n}")


def symmetrize(mask: Mask) -> Mask:
    """符号为 |a(ξ)|² 的掩模：out_k = (1/m) Σ_j c_j c_{j+k}"""
    out: Dict[Vector, Fraction] = {}
    items = list(mask.coeffs.items())
    for kj, cj in items:
        for kl, cl in items:
            k = tuple(b - a for a, b in zip(kj, kl))
            out[k] = out.get(k, Fraction(0)) + cj * cl
    scale = Fraction(1, mask.m)
    name = f"sym({mask.name})" if mask.name else None
    return Mask(mask.M, {k: v * scale for k, v in out.items()}, order=None, digits=mask.digits, name=name)


def symmetrized_bspline_mask(M: DilationMatrix, D: DigitSet, n: int) -> Mask:
    """对称化 B 样条 B̃_n 的掩模，符号为 |a₀|^{2(n+1)}"""
    return symmetrize(bspline_mask(M, D, n)).with_order(n, name=f"symmetrized-B{n}")


def nonzero_count(mask: Mask) -> int:
    return len(mask.coeffs)


def mask_eval(mask: Mask, xi) -> Any:
    """a(ξ) = (1/m) Σ c_k e^{-2πi(k,ξ)}；ξ 可为单点或 (n, d) 数组"""
    xi_arr = np.asarray(xi, dtype=float)
    single = xi_arr.ndim <= 1
    xi_arr = xi_arr.reshape(-1, mask.dim)
    phase = np.exp(-2j * np.pi * (xi_arr @ mask.support.T))
    values = phase @ mask.values / mask.m
    return complex(values[0]) if single else values


def _multi_indices(d: int, order: int) -> List[Tuple[int, ...]]:
    return [a for a in product(range(order + 1), repeat=d) if sum(a) == order]


def mask_derivative(mask: Mask, alpha: Tuple[int, ...], xi) -> Tuple[complex, float]:
    """
    ∂^α a(ξ) 的解析值，以及同量级项的绝对值之和（用于相对容差）
    """
    ks = mask.support.astype(float)
    c = mask.values
    mono = np.prod(ks ** np.array(alpha, dtype=float), axis=1)
    factor = (-2j * np.pi) ** sum(alpha)
    terms = c * mono * np.exp(-2j * np.pi * (ks @ np.asarray(xi, dtype=float)))
    value = factor * terms.sum() / mask.m
    scale = abs(factor) * np.abs(terms).sum() / mask.m
    return complex(value), float(scale)


def sum_rules_order(mask: Mask, tol: float = 1e-8, max_order: int = 32) -> int:
    """
    最大的 n 使 a 在 M^{-T}Δ_*（Δ_* ∈ D_* \\ {0}）处所有 ≤ n 阶偏导数为零
    a(0) ≠ 1 或在这些点上 a 不为零时返回 -1；容差相对于同阶项绝对值之和
    """
    if abs(mask_eval(mask, np.zeros(mask.dim)) - 1.0) > tol:
        return -1
    inv_t = mask.M.inverse.T
    points = [inv_t @ np.array(ds, dtype=float) for ds in dual_digits(mask.M).digits[1:]]
    cap = min(max_order, len(mask.coeffs))
    order = -1
    for n in range(cap + 1):
        for alpha in _multi_indices(mask.dim, n):
            for xi in points:
                value, scale = mask_derivative(mask, alpha, xi)
                if abs(value) > tol * max(1.0, scale):
                    return order
        order = n
    return order


def mask_to_json(mask: Mask) -> Dict[str, Any]:
    return {
        "matrix": mask.M.to_list(),
        "digits": mask.digits.to_list() if mask.digits is not None else None,
        "order": mask.order,
        "coeffs": [{"k": list(k), "c": str(c)} for k, c in mask.coeffs.items()],
    }


def mask_from_json(data: Any) -> Mask:
    """从 JSON 对象或字符串构造掩模"""
    if isinstance(data, str):
        data = json.loads(data)
    try:
        M = DilationMatrix.from_rows(data["matrix"])
        digits = data.get("digits")
        D = DigitSet.for_matrix(M, digits) if digits else None
        coeffs = {tuple(item["k"]): Fraction(str(item["c"])) for item in data["coeffs"]}
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as e:
        raise ValidationError(f"掩模 JSON 格式错误: {e}")
    return Mask(M, coeffs, order=data.get("order"), digits=D)


def bear_name_to_order(name: str) -> Tuple[str, int]:
    """'bear-3' 这类名称对应 B_{k-1}：返回 (预设名, 阶数 n)"""
    base, _, k = name.lower().partition("-")
    if not k.isdigit() or int(k) < 1:
        raise ValidationError(f"名称 {name} 应形如 <preset>-<k>，k ≥ 1")
    return base, int(k) - 1
