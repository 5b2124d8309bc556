#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
两数字小波模块
由正交化系数构造小波系数 ψ_k = e^{2πi(k,v)} c_k，
数值扫描零点自由环域确定衰减指数 q，尾部估计与系数截断
"""

from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .batch_processor import get_batch_processor
from .errors import UnsupportedError, ValidationError
from .lattice import DilationMatrix, Vector, coset_keys
from .ortho import CoeffField, TrigPoly, combine_shifts, fit_decay_constant, symbol_on_grid
from .refine import LatticeFunction, refine_values
from ..utils.status import get_logger

Q_STEP = 0.005
Q_RADII = 64
Q_ANGLES = 512
Q_THRESHOLD = 1e-6
TAIL_CUTS = (1, 10, 20, 30, 40, 50, 60)


@dataclass
class WaveletSystem:
    """φ₁ 的系数、带符号的 ψ 系数，以及构造用的 u、v 和平移 w"""

    M: DilationMatrix
    phi1: CoeffField
    psi: CoeffField
    u: Vector
    v: Tuple[float, ...]
    shift: Vector
    sign_rule: str
    q: Optional[float] = None
    inv_sqrt: Optional[CoeffField] = None


def _sorted_box(d: int, radius: int) -> List[Tuple[int, ...]]:
    """按 (sup 范数, 负分量个数, 字典序) 排列的整数向量"""
    box = product(range(-radius, radius + 1), repeat=d)
    return sorted(box, key=lambda k: (max(abs(x) for x in k), sum(x < 0 for x in k), k))


def _choose_u(M: DilationMatrix) -> Vector:
    """最小 sup 范数的非负非零 u，且 u ∉ MᵀZ^d"""
    Mt = M.transpose
    for radius in range(1, 8):
        for k in _sorted_box(M.dim, radius):
            if any(x < 0 for x in k) or not any(k):
                continue
            if np.any(coset_keys(Mt, np.array(k)) != 0):
                return k
    raise UnsupportedError("未找到合适的 u")


def _choose_shift(v: np.ndarray) -> Vector:
    """最小的 w 使 2(w, v) 为奇数"""
    for radius in range(1, 8):
        for w in _sorted_box(len(v), radius):
            s = 2.0 * float(np.dot(w, v))
            r = int(round(s))
            if abs(s - r) < 1e-9 and r % 2 != 0:
                return w
    raise UnsupportedError("未找到平移向量 w")


def _describe_signs(v: np.ndarray) -> str:
    """把 e^{2πi(k,v)} 写成 (−1)^{...} 的形式"""
    terms = [f"k{i + 1}" for i, vi in enumerate(v) if int(round(2 * vi)) % 2 != 0]
    return "(-1)^(" + "+".join(terms) + ")" if terms else "1"


def wavelet_coeffs(phi1: CoeffField, M: DilationMatrix, inv_sqrt: Optional[CoeffField] = None) -> WaveletSystem:
    """
    ψ(x) = Σ_k e^{2πi(k,v)} c_k φ₁(Mx + k − w)，v = M^{-T} u
    """
    if M.det_abs != 2:
        raise UnsupportedError(f"小波构造只支持 |det M| = 2，实际为 {M.det_abs}")
    u = _choose_u(M)
    v = M.inverse.T @ np.array(u, dtype=float)
    w = _choose_shift(v)
    signs = {}
    for k, c in phi1.coeffs.items():
        phase = 2.0 * float(np.dot(k, v))
        signs[k] = (1.0 if int(round(phase)) % 2 == 0 else -1.0) * c
    psi = CoeffField(coeffs=signs, q=phi1.q, C=phi1.C, norm_tail=phi1.norm_tail)
    return WaveletSystem(M=M, phi1=phi1, psi=psi, u=u, v=tuple(float(x) for x in v),
                         shift=w, sign_rule=_describe_signs(v), q=phi1.q, inv_sqrt=inv_sqrt)


def verify_qmf(ws: WaveletSystem, grid: int = 256) -> Tuple[float, float]:
    """
    |a₁(s)|² + |a₁(s+v)|² = 1 与 p(s)ā₁(s) + p(s+v)ā₁(s+v) = 0 的最大偏差
    p 直接由 ψ 系数组装：p(s) = (1/m) Σ ψ_k e^{-2πi(w−k, s)}
    """
    d = ws.M.dim
    m = ws.M.det_abs
    step = np.array([v * grid for v in ws.v])
    if np.any(np.abs(step - np.round(step)) > 1e-9):
        raise ValidationError("网格无法容纳 v 的平移")
    step = tuple(int(round(x)) for x in step)
    a1 = symbol_on_grid(ws.phi1, grid, scale=1.0 / m)
    neg = CoeffField({tuple(-x for x in k): c for k, c in ws.psi.coeffs.items()})
    p = symbol_on_grid(neg, grid, scale=1.0 / m, shift=ws.shift)
    axes = tuple(range(d))
    a1_v = np.roll(a1, [-s for s in step], axis=axes)
    p_v = np.roll(p, [-s for s in step], axis=axes)
    dev1 = float(np.max(np.abs(np.abs(a1) ** 2 + np.abs(a1_v) ** 2 - 1.0)))
    dev2 = float(np.max(np.abs(p * np.conj(a1) + p_v * np.conj(a1_v))))
    return dev1, dev2


def _laurent(phi: TrigPoly, M: DilationMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Φ(Mᵀξ) = Σ Φ_k z^{Mk}：返回 (指数, 系数)"""
    return phi.support @ M.array.T, phi.values


def _circle_values(exps: np.ndarray, coeffs: np.ndarray, r1: float, r2: float, angles: int) -> np.ndarray:
    """L(r₁e^{iθ₁}, r₂e^{iθ₂}) 在 angles² 个角度上的值，行对应 θ₂"""
    weights = coeffs * r1 ** exps[:, 0].astype(float) * r2 ** exps[:, 1].astype(float)
    arr = np.zeros((angles, angles), dtype=complex)
    np.add.at(arr, (np.mod(exps[:, 1], angles), np.mod(exps[:, 0], angles)), weights)
    return np.fft.ifft2(arr) * angles * angles


def _winding(values: np.ndarray) -> np.ndarray:
    """每一行沿 θ₁ 的环绕数"""
    ratio = np.roll(values, -1, axis=1) / values
    return np.rint(np.angle(ratio).sum(axis=1) / (2 * np.pi)).astype(int)


def _winding_consistent(exps: np.ndarray, coeffs: np.ndarray, q: float, radii: int, angles: int,
                        threshold: float) -> bool:
    """
    幅角原理：对每个扫描到的 z₂，z₁ ↦ L 沿 |z₁| = q 与 |z₁| = 1/q 的环绕数相同，
    即 z₁ 方向的环域内无零点；边界圆上 |L| 须大于绝对阈值
    """
    r2_grid = np.exp(np.linspace(np.log(q), -np.log(q), radii))
    processor = get_batch_processor()

    def check(r2: float) -> bool:
        inner = _circle_values(exps, coeffs, q, r2, angles)
        outer = _circle_values(exps, coeffs, 1.0 / q, r2, angles)
        lo = float(min(np.abs(inner).min(), np.abs(outer).min()))
        if lo <= threshold:
            return False
        return bool(np.all(_winding(inner) == _winding(outer)))

    return all(processor.map_ordered(check, r2_grid))


def _min_modulus(exps: np.ndarray, coeffs: np.ndarray, q: float, radii: int, angles: int) -> float:
    """(r₁, r₂) ∈ [q, 1/q]² 的 radii² 个对数网格点、每点 angles² 个角度上的 min |L|"""
    grid = np.exp(np.linspace(np.log(q), -np.log(q), radii))
    processor = get_batch_processor()

    def row(r1: float) -> float:
        return min(float(np.abs(_circle_values(exps, coeffs, r1, r2, angles)).min()) for r2 in grid)

    return min(processor.map_ordered(row, grid))


def annulus_zero_free(phi: TrigPoly, M: DilationMatrix, q: float, radii: int = Q_RADII,
                      angles: int = Q_ANGLES, threshold: float = Q_THRESHOLD) -> bool:
    """Φ(Mᵀξ) 在闭环域积 [q, 1/q]² 上无零点：环绕数一致且整个网格上 min |L| > threshold"""
    if M.dim != 2 or phi.dim != 2:
        raise UnsupportedError("find_q 只对二维情形定义")
    if not 0.0 < q < 1.0:
        raise ValidationError("q 必须在 (0, 1) 内")
    exps, coeffs = _laurent(phi, M)
    return (_winding_consistent(exps, coeffs, q, radii, angles, threshold)
            and _min_modulus(exps, coeffs, q, radii, angles) > threshold)


def find_q(phi: TrigPoly, M: DilationMatrix, step: float = Q_STEP, radii: int = Q_RADII,
           angles: int = Q_ANGLES, threshold: float = Q_THRESHOLD) -> float:
    """
    步长 step 网格上最小的 q，使 Φ(Mᵀξ) 对应的 Laurent 多项式在 [q,1/q]² 上无零点
    二分只用环绕数判定（条件对 q 单调），结果再用全网格 min |L| > threshold 复核，不通过时逐格增大 q
    """
    if M.dim != 2 or phi.dim != 2:
        raise UnsupportedError("find_q 只对二维情形定义")
    exps, coeffs = _laurent(phi, M)
    grid = [round(step * i, 10) for i in range(1, int(round(1.0 / step)))]

    def ok(i: int) -> bool:
        return _winding_consistent(exps, coeffs, grid[i], radii, angles, threshold)

    hi = len(grid) - 1
    if not ok(hi):
        get_logger().warning("q 的搜索收敛到 1，正交化接近奇异")
        return 1.0
    if ok(0):
        hi = 0
    else:
        lo = 0
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
    for i in range(hi, len(grid)):
        floor = _min_modulus(exps, coeffs, grid[i], radii, angles)
        if floor > threshold:
            get_logger().info(f"q = {grid[i]}：闭环域积上 min |L| = {floor:.3e}")
            return grid[i]
    get_logger().warning("q 的搜索收敛到 1，正交化接近奇异")
    return 1.0


def tail_bounds(q: float, C: float, m_cut: int) -> Tuple[float, float]:
    """
    |k₁|+|k₂| > m_cut 部分的 ℓ₁ 上界 H₁ 与 ℓ₂ 上界 H₂
    """
    if not 0.0 < q < 1.0:
        raise ValidationError("q 必须在 (0, 1) 内")
    if C <= 0.0:
        raise ValidationError("C 必须为正")
    m = float(m_cut)
    h1 = 4.0 * C * q ** (m + 1) * (1.0 + m - m * q) / (1.0 - q) ** 2
    h2 = 2.0 * C * q ** (m + 1) * np.sqrt(1.0 + m - m * q * q) / (1.0 - q * q)
    return float(h1), float(h2)


def tail_table(q: float, C: float = 1.0, cuts: Sequence[int] = TAIL_CUTS) -> List[Tuple[int, float, float]]:
    return [(m, *tail_bounds(q, C, m)) for m in cuts]


def truncate_coeffs(field: CoeffField, budget: float, norm: str = "l2", m_cut: int = 22,
                    q: Optional[float] = None, C: float = 1.0) -> CoeffField:
    """
    先保留窗口 |k|₁ ≤ m_cut，再在窗口内从最小的系数开始删除，直到被删部分的范数将超过 budget
    """
    if norm not in ("l1", "l2"):
        raise ValidationError(f"未知范数: {norm}")
    window = {k: c for k, c in field.coeffs.items() if sum(abs(x) for x in k) <= m_cut}
    order = sorted(window.items(), key=lambda kv: (abs(kv[1]), kv[0]))
    removed = 0.0
    drop = set()
    for k, c in order:
        if norm == "l1":
            trial = removed + abs(c)
            measure = trial
        else:
            trial = removed + c * c
            measure = np.sqrt(trial)
        if measure > budget:
            break
        removed = trial
        drop.add(k)
    kept = {k: c for k, c in window.items() if k not in drop}
    removed_norm = removed if norm == "l1" else float(np.sqrt(removed))
    q_use = q if q is not None else field.q
    tail = 0.0
    if q_use is not None and 0.0 < q_use < 1.0:
        h1, h2 = tail_bounds(q_use, field.C or C, m_cut)
        tail = h1 if norm == "l1" else h2
    out = CoeffField(coeffs=kept, q=q_use, C=field.C, norm_tail=removed_norm + tail)
    out.meta.update({"m_cut": m_cut, "norm": norm, "budget": budget, "removed": removed_norm})
    return out


def wavelet_values(ws: WaveletSystem, tf, v: np.ndarray, q_depth: int,
                   cutoff: float = 1e-8) -> LatticeFunction:
    """
    ψ 在深度 q_depth 格点上的值：先算深度 q_depth−1 的 φ₁，再按 ψ 系数平移叠加
    """
    if q_depth < 1:
        raise ValidationError("深度必须 ≥ 1")
    if ws.inv_sqrt is None:
        raise ValidationError("小波系统缺少 1/√Φ 的系数")
    lf = refine_values(tf, v, q_depth - 1)
    phi1 = combine_shifts(lf, ws.inv_sqrt, cutoff)
    psi = combine_shifts(phi1, ws.psi, cutoff, offset=ws.shift, sign=-1)
    return LatticeFunction(depth=q_depth, indices=psi.indices, values=psi.values, M=ws.M)


def eval_wavelet(ws: WaveletSystem, tf, v: np.ndarray, x, q_depth: int,
                 values: Optional[LatticeFunction] = None) -> float:
    """ψ(x)：取最近的深度 q_depth 格点"""
    lf = values if values is not None else wavelet_values(ws, tf, v, q_depth)
    M = ws.M
    x = np.asarray(x, dtype=float).reshape(M.dim)
    target = M.power(q_depth).astype(float) @ x
    inv = M.inverse_power(q_depth)
    base = np.floor(target).astype(np.int64)
    best = None
    for off in np.ndindex(*(3,) * M.dim):
        j = base + np.array(off, dtype=np.int64) - 1
        key = (round(float(np.linalg.norm(inv @ j - x)), 12), tuple(int(t) for t in j))
        if best is None or key < best:
            best = key
    return lf.value_at(best[1])


def decay_certificate(field: CoeffField, q: float) -> CoeffField:
    """按给定 q 拟合 C 并写回"""
    field.q = q
    field.C = fit_decay_constant(field, q)
    return field
