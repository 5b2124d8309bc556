#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
正交化模块
由对称化样条的整数点取值得到 Φ 多项式，用 FFT 计算 1/√Φ 的傅里叶系数，
并构造正交化后的细分系数 a₁(ξ) = a(ξ)√Φ(ξ)/√Φ(Mᵀξ)
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import RieszFailureError, ValidationError
from .lattice import Vector
from .mask import Mask, symmetrize
from .refine import LatticeFunction, integer_values, refine_values, transition_family
from .smart_cache import get_cache
from .tile import omega_set

TRUNCATION_EPS = 1e-12
PHI_EPS = 1e-15


@dataclass
class TrigPoly:
    """实三角多项式 Φ(ξ) = Σ Φ_k e^{-2πi(k,ξ)}"""

    coeffs: Dict[Vector, float]
    dim: int

    @property
    def support(self) -> np.ndarray:
        return np.array(list(self.coeffs.keys()), dtype=np.int64).reshape(-1, self.dim)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.coeffs.values()), dtype=float)

    def evaluate(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(-1, self.dim)
        phase = np.exp(-2j * np.pi * (xi @ self.support.T))
        return (phase @ self.values).real

    def grid_values(self, N: int) -> np.ndarray:
        """Φ 在 N^d 网格 ξ_j = j/N 上的值"""
        arr = np.zeros((N,) * self.dim)
        np.add.at(arr, tuple(np.mod(self.support, N).T), self.values)
        return np.fft.fftn(arr).real

    def symmetry_defect(self) -> float:
        return max(abs(c - self.coeffs.get(tuple(-x for x in k), 0.0)) for k, c in self.coeffs.items())


@dataclass
class CoeffField:
    """
    截断后的系数族，附带指数衰减证书 |c_k| ≤ C q^{|k|₁}
    norm_tail 记录舍去部分的范数上界
    """

    coeffs: Dict[Vector, float]
    q: Optional[float] = None
    C: Optional[float] = None
    norm_tail: float = 0.0
    aliasing: Optional[float] = None
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(next(iter(self.coeffs))) if self.coeffs else 0

    @property
    def size(self) -> int:
        return len(self.coeffs)

    @property
    def indices(self) -> np.ndarray:
        return np.array(list(self.coeffs.keys()), dtype=np.int64).reshape(len(self.coeffs), -1)

    @property
    def values(self) -> np.ndarray:
        return np.array(list(self.coeffs.values()), dtype=float)

    def get(self, k) -> float:
        return self.coeffs.get(tuple(int(x) for x in np.atleast_1d(k)), 0.0)

    def total(self) -> float:
        return float(self.values.sum())

    def l1(self) -> float:
        return float(np.abs(self.values).sum())

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2)))

    def sorted_rows(self) -> List[Tuple[Vector, float]]:
        """按 |c| 降序，相同时按下标"""
        return sorted(self.coeffs.items(), key=lambda kv: (-abs(kv[1]), kv[0]))

    def decay_violations(self, q: float, C: float, rtol: float = 1e-12) -> List[Vector]:
        out = []
        for k, c in self.coeffs.items():
            if abs(c) > C * q ** sum(abs(x) for x in k) * (1 + rtol):
                out.append(k)
        return out


def _field_from_grid(grid: np.ndarray, eps: float, scale: float = 1.0) -> CoeffField:
    """中心化网格下标（|k_i| < N/2），保留 |c| > eps"""
    N = grid.shape[0]
    values = grid * scale
    mask = np.abs(values) > eps
    idx = np.argwhere(mask)
    ks = np.where(idx >= N // 2, idx - N, idx)
    kept = values[mask]
    dropped = float(np.abs(values).sum() - np.abs(kept).sum())
    order = np.lexsort(ks.T[::-1])
    coeffs = {tuple(int(x) for x in ks[i]): float(kept[i]) for i in order}
    return CoeffField(coeffs=coeffs, norm_tail=max(dropped, 0.0))


def _check_grid(N: int) -> None:
    if N < 64 or N & (N - 1):
        raise ValidationError(f"网格大小 N 必须是 ≥ 64 的 2 的幂，实际为 {N}")


def phi_coeffs(mask: Mask, omega_depth: int = 12) -> TrigPoly:
    """Φ_k = f(−k)，f 是对称化掩模的可细分函数 φ * φ(−·)"""
    payload = {"mask": mask.cache_payload(), "depth": omega_depth}

    def compute() -> TrigPoly:
        sym = symmetrize(mask)
        D0 = mask.basis_digits()
        tf = transition_family(sym, D0, omega_set(sym, D0, omega_depth))
        v = integer_values(tf)
        coeffs: Dict[Vector, float] = {}
        for a, val in zip(tf.omega.elems, v):
            if abs(val) > PHI_EPS:
                coeffs[tuple(-x for x in a)] = float(val)
        return TrigPoly(dict(sorted(coeffs.items())), mask.dim)

    return get_cache().get_or_compute("phi_coeffs", payload, compute)


def riesz_bounds(phi: TrigPoly, grid: int = 512) -> Tuple[float, float]:
    """Φ 在网格上的最小值与最大值，即 Riesz 常数"""
    vals = phi.grid_values(grid)
    return float(vals.min()), float(vals.max())


def inv_sqrt_fourier(phi: TrigPoly, N: int, q: Optional[float] = None,
                     eps: float = TRUNCATION_EPS) -> CoeffField:
    """b_k：1/√Φ 的傅里叶系数，N^d 网格上逆变换得到"""
    _check_grid(N)
    grid = phi.grid_values(N)
    if grid.min() <= 0.0:
        raise RieszFailureError(f"Φ 在网格上不严格为正（最小值 {grid.min():.3e}）")
    b = np.fft.ifftn(1.0 / np.sqrt(grid)).real
    out = _field_from_grid(b, eps)
    if q is not None:
        out.q = q
        out.C = fit_decay_constant(out, q)
        out.aliasing = out.C * q ** (N // 2)
    out.meta["grid"] = N
    return out


def fit_decay_constant(field: CoeffField, q: float) -> float:
    """C = max |c_k| / q^{|k|₁}"""
    idx = field.indices
    weights = q ** np.abs(idx).sum(axis=1).astype(float)
    return float(np.max(np.abs(field.values) / weights))


def ortho_mask(mask: Mask, phi: TrigPoly, N: int, eps: float = TRUNCATION_EPS) -> CoeffField:
    """正交化函数 φ₁ 的细分系数，和为 m"""
    _check_grid(N)
    d = mask.dim
    M = mask.M
    P = phi.grid_values(N)
    if P.min() <= 0.0:
        raise RieszFailureError(f"Φ 在网格上不严格为正（最小值 {P.min():.3e}）")
    arr = np.zeros((N,) * d, dtype=complex)
    np.add.at(arr, tuple(np.mod(mask.support, N).T), mask.values / mask.m)
    a = np.fft.fftn(arr)
    # Φ(Mᵀξ_j) 等于网格上下标 (Mᵀ j) mod N 处的值
    J = np.indices((N,) * d).reshape(d, -1).T
    PM = P[tuple(np.mod(J @ M.array, N).T)].reshape((N,) * d)
    a1 = a * np.sqrt(P) / np.sqrt(PM)
    c = (mask.m * np.fft.ifftn(a1)).real
    c *= mask.m / c.sum()
    out = _field_from_grid(c, eps)
    out.meta["grid"] = N
    return out


def symbol_on_grid(field: CoeffField, N: int, scale: float = 1.0,
                   shift: Optional[Sequence[int]] = None) -> np.ndarray:
    """Σ scale·c_k e^{-2πi(k+shift, ξ_j)}，系数按模 N 折叠"""
    idx = field.indices
    if shift is not None:
        idx = idx + np.asarray(shift, dtype=np.int64)
    arr = np.zeros((N,) * field.dim, dtype=complex)
    np.add.at(arr, tuple(np.mod(idx, N).T), field.values * scale)
    return np.fft.fftn(arr)


def gram_check(b: CoeffField, phi: TrigPoly, grid: int = 256) -> float:
    """max | |B(ξ)|² Φ(ξ) − 1 |"""
    B = symbol_on_grid(b, grid)
    P = phi.grid_values(grid)
    return float(np.max(np.abs(np.abs(B) ** 2 * P - 1.0)))


def orthogonalized_values(tf, v: np.ndarray, b: CoeffField, q: int,
                          cutoff: float = 1e-10) -> LatticeFunction:
    """φ₁ = Σ_l b_l φ(· − l) 在深度 q 格点上的值"""
    lf = refine_values(tf, v, q)
    return combine_shifts(lf, b, cutoff)


def combine_shifts(lf: LatticeFunction, field: CoeffField, cutoff: float = 0.0,
                   offset: Optional[Sequence[int]] = None, sign: int = 1) -> LatticeFunction:
    """
    Σ_l c_l f(· − sign·(l − offset))，f 为深度 q 格点函数；
    平移在下标上对应 M^q (l − offset)
    """
    M = lf.M
    mq = M.power(lf.depth)
    keep = np.abs(field.values) > cutoff
    shifts = field.indices[keep]
    if offset is not None:
        shifts = shifts - np.asarray(offset, dtype=np.int64)
    shifts = sign * (shifts @ mq.T)
    weights = field.values[keep]
    all_idx = (lf.indices[None, :, :] + shifts[:, None, :]).reshape(-1, M.dim)
    all_val = (weights[:, None] * lf.values[None, :]).reshape(-1)
    uniq, inverse = np.unique(all_idx, axis=0, return_inverse=True)
    out = np.zeros(uniq.shape[0])
    np.add.at(out, inverse.reshape(-1), all_val)
    return LatticeFunction(depth=lf.depth, indices=uniq, values=out, M=M)


def shift_inner_products(lf: LatticeFunction, shifts: Iterable[Sequence[int]],
                         other: Optional[LatticeFunction] = None) -> Dict[Vector, float]:
    """
    黎曼和 (f, g(· + j))，格点单元体积为 |det M|^{-q}
    """
    M = lf.M
    mq = M.power(lf.depth)
    cell = float(M.det_abs) ** (-lf.depth)
    g = other if other is not None else lf
    lo = np.minimum(lf.indices.min(axis=0), g.indices.min(axis=0))
    hi = np.maximum(lf.indices.max(axis=0), g.indices.max(axis=0))
    shape = tuple(int(x) for x in hi - lo + 1)
    F = np.zeros(shape)
    G = np.zeros(shape)
    F[tuple((lf.indices - lo).T)] = lf.values
    G[tuple((g.indices - lo).T)] = g.values
    out = {}
    for j in shifts:
        key = tuple(int(x) for x in np.atleast_1d(j))
        off = [int(x) for x in mq @ np.array(key, dtype=np.int64)]
        out[key] = _cross(F, G, off) * cell
    return out


def _cross(F: np.ndarray, G: np.ndarray, offset: Sequence[int]) -> float:
    """Σ_i F(i) G(i + offset)"""
    src, dst = [], []
    for n, o in zip(F.shape, offset):
        if abs(o) >= n:
            return 0.0
        src.append(slice(max(0, -o), n - max(0, o)))
        dst.append(slice(max(0, o), n - max(0, -o)))
    return float(np.sum(F[tuple(src)] * G[tuple(dst)]))


def orthogonalize(mask: Mask, N: Optional[int] = None, omega_depth: int = 12,
                  eps: float = TRUNCATION_EPS) -> Tuple[TrigPoly, CoeffField, CoeffField]:
    """完整流程：返回 (Φ, b, 正交化系数)"""
    if N is None:
        N = 4096 if mask.dim == 1 else 256
    phi = phi_coeffs(mask, omega_depth)
    b = inv_sqrt_fourier(phi, N, eps=eps)
    c1 = ortho_mask(mask, phi, N, eps)
    return phi, b, c1
