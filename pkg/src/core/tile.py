#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
瓦片构造模块
生成吸引子 G 的有限深度点云、包围盒、栅格化，以及掩模吸引子 K 对应的 Ω 集合
点云全部以整数格点 M^{-p}·I_p 的形式保存，自仿射性检验可以精确进行
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .batch_processor import get_batch_processor
from .errors import BudgetExceededError, UnsupportedError
from .lattice import DigitSet, DilationMatrix, Vector, _exact_inverse, coset_keys, peel
from .smart_cache import get_cache
from ..utils.status import get_logger

MAX_POINTS = 10_000_000


@dataclass
class TileApprox:
    """深度 p 的部分和点云"""

    depth: int
    points: np.ndarray       # (m^p, d) 浮点
    int_points: np.ndarray   # (m^p, d) 整数，points = M^{-p} · int_points
    bbox: Tuple[np.ndarray, np.ndarray]

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def mesh_size(self, M: DilationMatrix) -> float:
        """点云网格尺度 ‖M^{-p}‖₂"""
        return float(np.linalg.norm(M.inverse_power(self.depth), 2))


@dataclass
class OmegaSet:
    """转移矩阵的下标集合 Ω（按字典序排列）"""

    elems: Tuple[Vector, ...]

    @property
    def size(self) -> int:
        return len(self.elems)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.elems, dtype=np.int64).reshape(len(self.elems), -1)

    def index(self) -> dict:
        return {a: i for i, a in enumerate(self.elems)}

    def __len__(self) -> int:
        return len(self.elems)


def _check_budget(m: int, p: int, max_points: int) -> None:
    if p < 0:
        raise BudgetExceededError("深度必须非负")
    if m ** p > max_points:
        raise BudgetExceededError(f"m^p = {m}^{p} 超过点数上限 {max_points}")


def tile_lattice_points(M: DilationMatrix, D: DigitSet, p: int,
                        max_points: int = MAX_POINTS) -> np.ndarray:
    """整数集合 I_p = {Σ_{k=1..p} M^{p-k} Δ_k}，按 I_{i+1} = M·I_i + D 递推"""
    _check_budget(M.det_abs, p, max_points)
    pts = np.zeros((1, M.dim), dtype=np.int64)
    mt = M.array.T
    digits = D.array
    for _ in range(p):
        pts = ((pts @ mt)[:, None, :] + digits[None, :, :]).reshape(-1, M.dim)
    return pts


def _tail_extent(M: DilationMatrix, D: DigitSet, start: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Σ_{k>start} M^{-k}Δ_k 的逐坐标下/上界
    逐项取最小/最大，项数截断后用算子范数几何级数补尾
    """
    digits = D.array.astype(float)
    dmax = float(np.max(np.linalg.norm(digits, axis=1)))
    lo = np.zeros(M.dim)
    hi = np.zeros(M.dim)
    if dmax == 0.0:
        return lo, hi
    inv = M.inverse
    power = M.inverse_power(start + 1)
    leading = None
    prev = None
    for _ in range(4000):
        vals = digits @ power.T
        lo += vals.min(axis=0)
        hi += vals.max(axis=0)
        term = float(np.linalg.norm(power, 2)) * dmax
        if leading is None:
            leading = term
        if term < 1e-12 * leading:
            ratio = term / prev if prev else 0.0
            if ratio < 1.0:
                rest = term * ratio / (1.0 - ratio)
                lo -= rest
                hi += rest
            break
        prev = term
        power = inv @ power
    return lo, hi


def tile_points(M: DilationMatrix, D: DigitSet, p: int, max_points: int = MAX_POINTS) -> TileApprox:
    """G 的 m^p 个深度 p 部分和"""
    ints = tile_lattice_points(M, D, p, max_points)
    points = ints @ M.inverse_power(p).T
    tail_lo, tail_hi = _tail_extent(M, D, p)
    bbox = (points.min(axis=0) + tail_lo, points.max(axis=0) + tail_hi)
    return TileApprox(depth=p, points=points, int_points=ints, bbox=bbox)


def attractor_bbox(M: DilationMatrix, D: DigitSet) -> Tuple[np.ndarray, np.ndarray]:
    """整个吸引子的包围盒（不生成点云）"""
    return _tail_extent(M, D, 0)


def tile_center(M: DilationMatrix, D: DigitSet) -> np.ndarray:
    """两数字瓦片的对称中心 c = ½ Σ_{j≥1} M^{-j} e = ½ (M − I)^{-1} e"""
    if D.size != 2:
        raise UnsupportedError("对称中心只对两数字瓦片定义")
    rows = [[M.entries[i][j] - (1 if i == j else 0) for j in range(M.dim)] for i in range(M.dim)]
    _, inv = _exact_inverse(rows)
    e = D.digits[1]
    center = [Fraction(1, 2) * sum(inv[i][j] * e[j] for j in range(M.dim)) for i in range(M.dim)]
    return np.array([float(c) for c in center])


def tile_membership(M: DilationMatrix, D: DigitSet, p: int, x) -> np.ndarray:
    """
    近似 χ_G(x)：取最近的深度 p 格点 j = round(M^p x)，剥离 p 位数字后落在 0 号单元即视为属于 G
    """
    x = np.asarray(x, dtype=float).reshape(-1, M.dim)
    j = np.rint(x @ M.power(p).T.astype(float)).astype(np.int64)
    cells, _ = peel(M, D, j, p)
    return np.all(cells == 0, axis=1)


def _raster_axes(lo: np.ndarray, hi: np.ndarray, shape: Tuple[int, ...]) -> List[np.ndarray]:
    return [lo[i] + (np.arange(n) + 0.5) * (hi[i] - lo[i]) / n for i, n in enumerate(shape)]


def measure_estimate(M: DilationMatrix, D: DigitSet, grid_n: int = 256, p: int = 16) -> float:
    """用每单位长度 grid_n 个格子的栅格估计 µ(G)"""
    lo, hi = attractor_bbox(M, D)
    shape = tuple(max(1, int(np.ceil((hi[i] - lo[i]) * grid_n))) for i in range(M.dim))
    hi = lo + np.array(shape, dtype=float) / grid_n
    axes = _raster_axes(lo, hi, shape)
    centers = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    inside = tile_membership(M, D, p, centers)
    return float(np.count_nonzero(inside)) / grid_n ** M.dim


def partition_of_unity_check(M: DilationMatrix, D: DigitSet, grid_n: int = 256, p: int = 16) -> float:
    """
    单位胞上 Σ_k χ_G(x − k) 与 1 的最大偏差
    距吸引子边界 2 个格子以内的格子不参与比较
    """
    d = M.dim
    lo, hi = attractor_bbox(M, D)
    ranges = [range(int(np.floor(lo[i])) - 1, int(np.ceil(hi[i])) + 2) for i in range(d)]
    pad = 2
    n = grid_n + 2 * pad
    axes = [(np.arange(n) - pad + 0.5) / grid_n for _ in range(d)]
    centers = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    total = np.zeros((n,) * d)
    boundary = np.zeros((n,) * d, dtype=bool)
    footprint = np.ones((2 * pad + 1,) * d, dtype=bool)
    for shift in product(*ranges):
        mem = tile_membership(M, D, p, centers + np.array(shift, dtype=float)).reshape((n,) * d)
        if not mem.any():
            continue
        total += mem
        # 邻域内同时存在内外点的格子视为边界带
        near_max = ndimage.maximum_filter(mem.astype(np.uint8), footprint=footprint, mode="nearest")
        near_min = ndimage.minimum_filter(mem.astype(np.uint8), footprint=footprint, mode="nearest")
        boundary |= near_max != near_min
    core = tuple(slice(pad, pad + grid_n) for _ in range(d))
    keep = ~boundary[core]
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(total[core][keep] - 1.0)))


def render_tile(M: DilationMatrix, D: DigitSet, width: int, height: int, p: int,
                max_points: int = MAX_POINTS) -> np.ndarray:
    """
    深度 p 点云在包围盒上的 0/1 占据栅格，第 0 行对应 y 最大处
    一维时返回 height 行相同的条带
    """
    approx = tile_points(M, D, p, max_points)
    lo, hi = approx.bbox
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    col = np.clip(((approx.points[:, 0] - lo[0]) / span[0] * width).astype(np.int64), 0, width - 1)
    raster = np.zeros((height, width), dtype=np.uint8)
    if M.dim == 1:
        raster[:, np.unique(col)] = 1
        return raster
    row = np.clip(((hi[1] - approx.points[:, 1]) / span[1] * height).astype(np.int64), 0, height - 1)
    raster[row, col] = 1
    return raster


def raster_measure(raster: np.ndarray, bbox: Tuple[np.ndarray, np.ndarray]) -> float:
    """占据格数 × 单格面积"""
    lo, hi = bbox
    h, w = raster.shape
    cell = (hi[0] - lo[0]) / w * ((hi[1] - lo[1]) / h if len(lo) > 1 else 1.0)
    return float(np.count_nonzero(raster)) * float(cell)


def _close_upward(M: DilationMatrix, D0: DigitSet, support: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """补全转移矩阵的列：b ∈ Ω 且 c_{Ma−b+Δ} ≠ 0 时 a 也进入 Ω"""
    current = {tuple(int(x) for x in a) for a in cells}
    digits = D0.array
    for _ in range(1000):
        omega = np.array(sorted(current), dtype=np.int64).reshape(-1, M.dim)
        # t = γ + b − Δ，需 t ∈ MZ^d
        t = (support[:, None, None, :] + omega[None, :, None, :] - digits[None, None, :, :]).reshape(-1, M.dim)
        t = np.unique(t, axis=0)
        t = t[np.all(coset_keys(M, t) == 0, axis=1)]
        rows = (t @ M.adj_array.T) // M.det
        new = {tuple(int(x) for x in a) for a in rows} - current
        if not new:
            return omega
        current |= new
    raise BudgetExceededError("Ω 闭包迭代未稳定")


def _carry_levels(M: DilationMatrix, D0: DigitSet, support: np.ndarray, p: int, max_cells: int) -> np.ndarray:
    """
    K_p 各点剥离 p 位数字后落入的单元：C_0 = {0}，C_{i+1} = peel₁(C_i + supp c)
    C 稳定后提前结束，单元数超过 max_cells 时报错
    """
    cells = np.zeros((1, M.dim), dtype=np.int64)
    for level in range(p):
        sums = (cells[:, None, :] + support[None, :, :]).reshape(-1, M.dim)
        nxt = np.unique(peel(M, D0, np.unique(sums, axis=0), 1)[0], axis=0)
        if nxt.shape[0] > max_cells:
            raise BudgetExceededError(f"第 {level + 1} 层单元数 {nxt.shape[0]} 超过上限 {max_cells}")
        if np.array_equal(nxt, cells):
            break
        cells = nxt
    return cells


def _averaged_transition(M: DilationMatrix, D0: DigitSet, coeffs: dict, omega: np.ndarray) -> np.ndarray:
    """P̄ = (1/m) Σ_Δ T_Δ，T_Δ(a, b) = c_{Ma−b+Δ}"""
    index = {tuple(int(x) for x in a): i for i, a in enumerate(omega)}
    n = omega.shape[0]
    P = np.zeros((n, n))
    for j, b in enumerate(omega):
        for delta in D0.digits:
            for gamma, c in coeffs.items():
                t = np.array(gamma) + b - np.array(delta)
                if np.any(coset_keys(M, t) != 0):
                    continue
                i = index.get(tuple(int(x) for x in (t @ M.adj_array.T) // M.det))
                if i is not None:
                    P[i, j] += float(c)
    return P / M.det_abs


def _positive_mass_cells(M: DilationMatrix, D0: DigitSet, mask, omega: np.ndarray,
                         rel_tol: float = 1e-10, max_iter: int = 20_000) -> np.ndarray:
    """
    非负掩模：w(a) = ∫_{a+G0} φ 满足 w = P̄ w，懒惰幂迭代求 w，
    去掉只在边界上碰到 K 的单元（w 为零）
    """
    P = _averaged_transition(M, D0, mask.coeffs, omega)
    w = np.full(omega.shape[0], 1.0 / omega.shape[0])
    for _ in range(max_iter):
        nxt = 0.5 * (w + P @ w)
        done = float(np.sum(np.abs(nxt - w))) < 1e-15
        w = nxt
        if done:
            break
    keep = w > rel_tol * float(np.max(w))
    return omega[keep]


def omega_set(mask, D0: DigitSet, p: int = 12, max_points: int = 2_000_000) -> OmegaSet:
    """
    Ω：K_p 各点剥离 p 位 D0 数字所在的单元，按转移关系向上闭包；
    非负掩模再去掉零测度单元。max_points 限制任一层的单元数
    """
    M = mask.M
    payload = {"mask": mask.cache_payload(), "digits": D0.to_list(), "p": p, "method": "carry"}

    def compute() -> OmegaSet:
        support = mask.support
        hits = _carry_levels(M, D0, support, p, max_points)
        omega = _close_upward(M, D0, support, hits)
        if omega.shape[0] > hits.shape[0]:
            get_logger().info(f"Ω 闭包补入 {omega.shape[0] - hits.shape[0]} 个单元")
        if all(c >= 0 for c in mask.coeffs.values()) and omega.shape[0] > 1:
            kept = _positive_mass_cells(M, D0, mask, omega)
            if kept.shape[0] < omega.shape[0]:
                get_logger().info(f"Ω 去掉 {omega.shape[0] - kept.shape[0]} 个零测度单元")
                omega = _close_upward(M, D0, support, kept)
        elems = tuple(sorted(tuple(int(x) for x in a) for a in omega))
        return OmegaSet(elems)

    return get_cache().get_or_compute("omega_set", payload, compute)


def omega_closure_defects(mask, D0: DigitSet, omega: OmegaSet) -> List[Vector]:
    """检查列完整性：返回缺失的行下标（应为空）"""
    M = mask.M
    inside = set(omega.elems)
    missing = set()
    for b in omega.elems:
        for delta in D0.digits:
            for gamma in mask.coeffs:
                t = np.array(gamma) + np.array(b) - np.array(delta)
                if np.all(coset_keys(M, t) == 0):
                    a = tuple(int(x) for x in (t @ M.adj_array.T) // M.det)
                    if a not in inside:
                        missing.add(a)
    return sorted(missing)


def central_symmetry_defect(M: DilationMatrix, D: DigitSet, p: int) -> float:
    """
    深度 p 点云在 x ↦ 2c − x 下的不变性偏差（以点云网格尺度为单位）
    """
    approx = tile_points(M, D, p)
    c = tile_center(M, D)
    mirrored = 2 * c - approx.points
    # 镜像后的点与原点云的最近距离
    tree = cKDTree(approx.points)
    dist, _ = tree.query(mirrored)
    tail = float(np.max(np.abs(np.concatenate(_tail_extent(M, D, p)))))
    return float(np.max(dist)) / max(tail, 1e-300)
