#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
精确求值模块
转移矩阵 (T_Δ)_{a,b} = c_{Ma−b+Δ}、整数点取值（T₀ 的特征值 1 特征向量）
以及沿 M 进制展开在细化格 M^{-q}Z^d 上的逐层求值
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .batch_processor import get_batch_processor
from .errors import AmbiguityError, ConvergenceError, DegenerateMaskError, ValidationError
from .lattice import DigitSet, DilationMatrix, Vector, peel
from .tile import OmegaSet, omega_set
from ..utils.status import get_logger

EIG_TOL = 1e-10
RESIDUAL_TOL = 1e-12
INVERSE_SHIFT = 1.0 + 1e-8
INVERSE_MAX_ITER = 200
ROW_CHUNK = 4096


@dataclass
class TransitionFamily:
    """转移矩阵族，下标顺序与 omega 一致"""

    M: DilationMatrix
    mask: object
    omega: OmegaSet
    digits0: DigitSet
    mats: np.ndarray  # (m, N, N)

    @property
    def size(self) -> int:
        return self.omega.size

    @property
    def m(self) -> int:
        return self.mats.shape[0]

    def matrix(self, i: int) -> np.ndarray:
        return self.mats[i]


@dataclass
class LatticeFunction:
    """φ(M^{-q} j) 的取样，indices 为 (n, d) 整数，values 为 (n,)"""

    depth: int
    indices: np.ndarray
    values: np.ndarray
    M: Optional[DilationMatrix] = None

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def as_dict(self) -> Dict[Vector, float]:
        return {tuple(int(x) for x in j): float(v) for j, v in zip(self.indices, self.values)}

    def value_at(self, j) -> float:
        key = tuple(int(x) for x in np.atleast_1d(j))
        hit = np.all(self.indices == np.array(key), axis=1)
        return float(self.values[hit][0]) if hit.any() else 0.0

    def positions(self) -> np.ndarray:
        """格点的物理坐标 M^{-q} j"""
        if self.M is None:
            raise ValidationError("缺少扩张矩阵，无法换算物理坐标")
        return self.indices @ self.M.inverse_power(self.depth).T

    def window(self, radius: float) -> "LatticeFunction":
        """只保留物理坐标落在 [-radius, radius]^d 内的格点"""
        keep = np.all(np.abs(self.positions()) <= radius, axis=1)
        return LatticeFunction(self.depth, self.indices[keep], self.values[keep], self.M)

    def to_dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """按下标包围盒展开为稠密数组，返回 (数组, 左下角下标)"""
        lo = self.indices.min(axis=0)
        shape = tuple(int(x) for x in self.indices.max(axis=0) - lo + 1)
        dense = np.zeros(shape)
        dense[tuple((self.indices - lo).T)] = self.values
        return dense, lo


def transition_family(mask, D0: DigitSet, omega: Optional[OmegaSet] = None,
                      depth: int = 12) -> TransitionFamily:
    """按定义填充 T_Δ，Δ 取 D0 的顺序"""
    M = mask.M
    if omega is None:
        omega = omega_set(mask, D0, depth)
    elems = omega.array
    n = omega.size
    mats = np.zeros((D0.size, n, n))
    coeffs = {k: float(c) for k, c in mask.coeffs.items()}
    ma = elems @ M.array.T
    for i, delta in enumerate(D0.digits):
        for a in range(n):
            for b in range(n):
                k = tuple(int(x) for x in ma[a] - elems[b] + np.array(delta))
                mats[i, a, b] = coeffs.get(k, 0.0)
    return TransitionFamily(M=M, mask=mask, omega=omega, digits0=D0, mats=mats)


def _apply_rows(T: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """逐行计算 T·vec；每个元素按固定长度求和，结果与批大小无关"""
    return np.sum(vecs[:, None, :] * T[None, :, :], axis=2)


def integer_values(tf: TransitionFamily, eig_tol: float = EIG_TOL,
                   residual_tol: float = RESIDUAL_TOL) -> np.ndarray:
    """
    T₀ 关于特征值 1 的特征向量，归一化使 Σ v_a = 1，v_a ≈ φ(a)
    """
    T0 = tf.mats[0]
    n = T0.shape[0]
    eigvals = np.linalg.eigvals(T0)
    if np.min(np.abs(eigvals - 1.0)) > eig_tol:
        raise DegenerateMaskError("T₀ 没有特征值 1，掩模退化")
    sing = np.linalg.svd(T0 - np.eye(n), compute_uv=False)
    nullity = int(np.count_nonzero(sing <= eig_tol * max(1.0, sing[0])))
    if nullity > 1:
        raise AmbiguityError(f"特征值 1 的特征子空间维数为 {nullity}，无法唯一确定整数点取值")

    # 移位逆迭代，确定性初值为全 1
    lu = lu_factor(T0 - INVERSE_SHIFT * np.eye(n))
    vec = np.ones(n) / np.sqrt(n)
    residual = np.inf
    for _ in range(INVERSE_MAX_ITER):
        vec = lu_solve(lu, vec)
        vec /= np.linalg.norm(vec)
        residual = float(np.linalg.norm(T0 @ vec - vec))
        if residual <= residual_tol:
            break
    else:
        raise ConvergenceError("逆迭代未收敛到特征值 1", residual)
    total = vec.sum()
    if abs(total) < 1e-12:
        raise DegenerateMaskError("特征向量分量之和为零，无法按单位分解归一化")
    return vec / total


def _refine_states(tf: TransitionFamily, v: np.ndarray, q: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    所有长度 q 的数字串（最低位在前）对应的 Ω 向量和整数偏移 r = Σ M^i Δ_i
    串下标 s = Σ idx_i m^i；全零串保持 v 不变
    """
    m = tf.m
    M = tf.M
    digits = tf.digits0.array
    vecs = v[None, :].astype(float)
    offsets = np.zeros((1, M.dim), dtype=np.int64)
    processor = get_batch_processor()
    power = np.eye(M.dim, dtype=np.int64)
    for _ in range(q):
        def branch(i: int) -> np.ndarray:
            T = tf.mats[i]
            chunks = [vecs[s:s + ROW_CHUNK] for s in range(0, vecs.shape[0], ROW_CHUNK)]
            return np.concatenate([_apply_rows(T, c) for c in chunks], axis=0)

        blocks = processor.map_ordered(branch, range(m))
        blocks[0][0] = v
        vecs = np.concatenate(blocks, axis=0)
        shifts = digits @ power.T
        offsets = np.concatenate([offsets + shifts[i] for i in range(m)], axis=0)
        power = M.array @ power
    return vecs, offsets


def refine_values(tf: TransitionFamily, v: np.ndarray, q: int) -> LatticeFunction:
    """
    φ 在 M^{-q}Z^d 上的取值：j = M^q a + r，值为对应 Ω 向量的 a 分量
    """
    if q < 0:
        raise ValidationError("细化深度必须非负")
    vecs, offsets = _refine_states(tf, v, q)
    mq = tf.M.power(q)
    base = tf.omega.array @ mq.T
    indices = (offsets[:, None, :] + base[None, :, :]).reshape(-1, tf.M.dim)
    values = vecs.reshape(-1)
    order = np.lexsort(indices.T[::-1])
    return LatticeFunction(depth=q, indices=indices[order], values=values[order], M=tf.M)


def _value_at_index(tf: TransitionFamily, v: np.ndarray, j, q: int) -> float:
    cells, idx = peel(tf.M, tf.digits0, np.atleast_1d(j), q)
    a = tuple(int(x) for x in cells[0])
    lookup = tf.omega.index()
    if a not in lookup:
        return 0.0
    vec = v[None, :].astype(float)
    started = False
    for i in idx[0]:
        if not started and i == 0:
            continue
        started = True
        vec = _apply_rows(tf.mats[int(i)], vec)
    return float(vec[0, lookup[a]])


def eval_point(tf: TransitionFamily, v: np.ndarray, x, q: int) -> float:
    """取距 x 最近的深度 q 格点的值；等距时取字典序较小的下标"""
    if q < 1:
        raise ValidationError("深度 q 必须 ≥ 1")
    M = tf.M
    x = np.asarray(x, dtype=float).reshape(M.dim)
    mq = M.power(q).astype(float)
    inv = M.inverse_power(q)
    base = np.floor(mq @ x).astype(np.int64)
    best: Optional[Tuple[float, Vector]] = None
    for off in np.ndindex(*(3,) * M.dim):
        j = base + np.array(off, dtype=np.int64) - 1
        dist = float(np.linalg.norm(inv @ j - x))
        key = (round(dist, 12), tuple(int(t) for t in j))
        if best is None or key < best:
            best = key
    return _value_at_index(tf, v, np.array(best[1]), q)


def partition_of_unity_deviation(tf: TransitionFamily, v: np.ndarray, q: int) -> float:
    """深度 q 格点上 |Σ_k φ(x − k) − 1| 的最大值"""
    vecs, _ = _refine_states(tf, v, q)
    return float(np.max(np.abs(vecs.sum(axis=1) - 1.0)))


def lattice_to_rows(lf: LatticeFunction) -> List[List]:
    """CSV 行：j_1..j_d, value"""
    return [[int(x) for x in j] + [float(val)] for j, val in zip(lf.indices, lf.values)]


def downsample(lf: LatticeFunction) -> LatticeFunction:
    """取深度 q 中落在 M Z^d 上的格点，换算为深度 q−1"""
    if lf.M is None or lf.depth < 1:
        raise ValidationError("无法降采样")
    M = lf.M
    keys = np.mod(lf.indices @ M.adj_array.T, M.det_abs)
    keep = np.all(keys == 0, axis=1)
    coarse = (lf.indices[keep] @ M.adj_array.T) // M.det
    order = np.lexsort(coarse.T[::-1])
    return LatticeFunction(depth=lf.depth - 1, indices=coarse[order], values=lf.values[keep][order], M=M)


def build_evaluator(mask, D0: Optional[DigitSet] = None, depth: int = 12, eig_tol: float = EIG_TOL,
                    residual_tol: float = RESIDUAL_TOL) -> Tuple[TransitionFamily, np.ndarray]:
    """一步得到 (转移矩阵族, 整数点取值)"""
    D0 = D0 or mask.basis_digits()
    tf = transition_family(mask, D0, depth=depth)
    v = integer_values(tf, eig_tol, residual_tol)
    get_logger().info(f"转移矩阵维数 N = {tf.size}")
    return tf, v
