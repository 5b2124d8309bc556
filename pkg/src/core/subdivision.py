#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
细分格式模块
细分算子 [Su](k) = Σ_j c_{k−Mj} u(j) 在稀疏控制网上的实现，
收敛性报告、经验收敛速率、多项式再生检验以及网格导出
"""

from dataclasses import dataclass, field, replace
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetExceededError, ValidationError
from .lattice import DilationMatrix, Vector
from .mask import Mask, sum_rules_order
from .regularity import holder_C
from ..utils.status import get_logger

BOUNDARY_MODES = ("zero", "held", "periodic")
MAX_NET_POINTS = 10_000_000
VERDICT_TOL = 1e-9


def _reduce(indices: np.ndarray, period: np.ndarray) -> np.ndarray:
    """模周期格 L 的规范代表元 k − L·floor(L^{-1}k)，精确整数运算"""
    det = int(round(np.linalg.det(period)))
    adj = np.round(np.linalg.inv(period) * det).astype(np.int64)
    coeff = np.floor_divide(indices @ adj.T, det)
    return indices - coeff @ period.T


@dataclass
class ControlNet:
    """
    稀疏控制网：indices (n, d) 整数，values (n, c)
    period 为周期格矩阵（列向量生成），None 表示有限网（零延拓）
    """

    indices: np.ndarray
    values: np.ndarray
    period: Optional[np.ndarray] = None
    level: int = 0
    boundary: str = "zero"
    held: Optional[Dict[Vector, np.ndarray]] = field(default=None, repr=False)
    box: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(len(self.indices), -1)
        values = np.asarray(self.values, dtype=float)
        self.values = values.reshape(len(values), -1)
        if self.indices.shape[0] != self.values.shape[0]:
            raise ValidationError("下标与取值个数不一致")
        if self.boundary not in BOUNDARY_MODES:
            raise ValidationError(f"未知边界模式: {self.boundary}")
        if self.period is not None:
            self.period = np.asarray(self.period, dtype=np.int64)

    @property
    def dims(self) -> int:
        return int(self.indices.shape[1])

    @property
    def channels(self) -> int:
        return int(self.values.shape[1])

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])

    def as_dict(self) -> Dict[Vector, np.ndarray]:
        return {tuple(int(x) for x in k): val for k, val in zip(self.indices, self.values)}

    def value_at(self, k) -> np.ndarray:
        key = np.atleast_1d(np.asarray(k, dtype=np.int64))
        if self.period is not None:
            key = _reduce(key[None, :], self.period)[0]
        hit = np.all(self.indices == key, axis=1)
        return self.values[hit][0] if hit.any() else np.zeros(self.channels)

    def sorted(self) -> "ControlNet":
        order = np.lexsort(self.indices.T[::-1])
        return replace(self, indices=self.indices[order], values=self.values[order])

    @classmethod
    def grid(cls, values: np.ndarray, boundary: str = "zero", origin: Sequence[int] = None) -> "ControlNet":
        """由 rows×cols×c（或 n×c）数组建网；periodic 时周期即网格尺寸"""
        values = np.asarray(values, dtype=float)
        d = 2 if values.ndim == 3 else 1
        shape = values.shape[:d]
        idx = np.array(list(product(*(range(n) for n in shape))), dtype=np.int64).reshape(-1, d)
        if origin is not None:
            idx = idx + np.asarray(origin, dtype=np.int64)
        vals = values.reshape(int(np.prod(shape)), -1)
        period = None
        if boundary == "periodic":
            if min(shape) < 3:
                raise ValidationError("周期网每个方向至少需要 3 个点")
            period = np.diag(shape).astype(np.int64)
        net = cls(idx, vals, period=period, boundary=boundary)
        if boundary == "held":
            net = hold_boundary(net)
        return net


def hold_boundary(net: ControlNet) -> ControlNet:
    """把初始网下标包围盒边界上的点固定"""
    lo = net.indices.min(axis=0)
    hi = net.indices.max(axis=0)
    on_edge = np.any((net.indices == lo) | (net.indices == hi), axis=1)
    held = {tuple(int(x) for x in k): v.copy() for k, v in zip(net.indices[on_edge], net.values[on_edge])}
    box = (lo.astype(float), hi.astype(float))
    return replace(net, boundary="held", held=held, box=box)


def subdivide_step(mask: Mask, net: ControlNet) -> ControlNet:
    """一步细分：out[Mj + s] += c_s u(j)"""
    M = mask.M
    if net.dims != M.dim:
        raise ValidationError("控制网维数与掩模不一致")
    support = mask.support
    coeffs = mask.values
    targets = (net.indices @ M.array.T)[:, None, :] + support[None, :, :]
    targets = targets.reshape(-1, M.dim)
    contrib = (coeffs[None, :, None] * net.values[:, None, :]).reshape(-1, net.channels)
    period = None
    if net.period is not None:
        period = M.array @ net.period
        targets = _reduce(targets, period)
    uniq, inverse = np.unique(targets, axis=0, return_inverse=True)
    out = np.zeros((uniq.shape[0], net.channels))
    np.add.at(out, inverse.reshape(-1), contrib)
    result = ControlNet(uniq, out, period=period, level=net.level + 1, boundary=net.boundary)
    if net.boundary == "held" and net.held is not None:
        result = _apply_held(M, net, result)
    return result


def _apply_held(M: DilationMatrix, net: ControlNet, result: ControlNet) -> ControlNet:
    """固定点随 M 映射后保持原值，输出限制在初始下标盒内"""
    held = {tuple(int(x) for x in M.array @ np.array(k)): v for k, v in net.held.items()}
    lo, hi = net.box
    phys = result.indices @ M.inverse_power(result.level).T
    inside = np.all((phys >= lo - 1e-9) & (phys <= hi + 1e-9), axis=1)
    indices = result.indices[inside]
    values = result.values[inside].copy()
    lookup = {tuple(int(x) for x in k): i for i, k in enumerate(indices)}
    for k, v in held.items():
        if k in lookup:
            values[lookup[k]] = v
    return replace(result, indices=indices, values=values, held=held, box=net.box)


def run_scheme(mask: Mask, net: ControlNet, q: int, max_points: int = MAX_NET_POINTS) -> ControlNet:
    """q 次细分，level 记录有效格 M^{-q}Z^d"""
    if q < 0:
        raise ValidationError("迭代次数必须非负")
    estimate = net.size * (mask.m ** q)
    if estimate > max_points:
        raise BudgetExceededError(f"预计 {estimate} 个控制点，超过上限 {max_points}")
    out = net
    for _ in range(q):
        out = subdivide_step(mask, out)
    return out


def delta_net(d: int, channels: int = 1) -> ControlNet:
    return ControlNet(np.zeros((1, d), dtype=np.int64), np.ones((1, channels)))


def limit_samples(mask: Mask, net: ControlNet, tf, v: np.ndarray) -> ControlNet:
    """
    极限函数在当前格点上的值 L(k) = Σ_a v_a u(k − a)，a 取遍 Ω；
    tf, v 为同一掩模的转移矩阵族和整数点取值
    """
    if net.dims != mask.dim:
        raise ValidationError("控制网维数与掩模不一致")
    elems = tf.omega.array
    targets = (net.indices[:, None, :] + elems[None, :, :]).reshape(-1, net.dims)
    contrib = (v[None, :, None] * net.values[:, None, :]).reshape(-1, net.channels)
    if net.period is not None:
        targets = _reduce(targets, net.period)
    uniq, inverse = np.unique(targets, axis=0, return_inverse=True)
    out = np.zeros((uniq.shape[0], net.channels))
    np.add.at(out, inverse.reshape(-1), contrib)
    return ControlNet(uniq, out, period=net.period, level=net.level, boundary=net.boundary)


def _monomials(d: int, degree: int) -> List[Tuple[int, ...]]:
    return [a for a in product(range(degree + 1), repeat=d) if sum(a) <= degree]


def _interior(mask: Mask, indices: np.ndarray, radius: int) -> np.ndarray:
    """所有贡献点都在初始盒 [−radius, radius]^d 内的输出下标"""
    M = mask.M
    phys = indices @ M.inverse.T
    reach = float(np.max(np.abs(mask.support @ M.inverse.T)))
    return np.all(np.abs(phys) <= radius - reach - 1e-9, axis=1)


def reproduction_shift(mask: Mask, radius: int = 6) -> np.ndarray:
    """
    线性数据 u(j) = j_i 细分后满足 Su(k) = (M^{-1}k)_i − τ_i，返回拟合的 τ
    """
    M = mask.M
    d = M.dim
    idx = np.array(list(product(range(-radius, radius + 1), repeat=d)), dtype=np.int64)
    net = ControlNet(idx, idx.astype(float))
    out = subdivide_step(mask, net)
    keep = _interior(mask, out.indices, radius)
    phys = out.indices[keep] @ M.inverse.T
    return np.mean(phys - out.values[keep], axis=0)


def polynomial_reproduction_error(mask: Mask, degree: int, radius: int = 6) -> float:
    """
    次数 ≤ degree 的单项式数据细分一步后，在细化格物理坐标上按同次数多项式最小二乘拟合的最大残差
    一次多项式另外检验纯平移关系
    """
    M = mask.M
    d = M.dim
    idx = np.array(list(product(range(-radius, radius + 1), repeat=d)), dtype=np.int64)
    exps = _monomials(d, degree)
    data = np.stack([np.prod(idx.astype(float) ** np.array(a, dtype=float), axis=1) for a in exps], axis=1)
    out = subdivide_step(mask, ControlNet(idx, data))
    keep = _interior(mask, out.indices, radius)
    if not keep.any():
        raise ValidationError("初始盒太小，没有内部点")
    phys = out.indices[keep] @ M.inverse.T
    basis = np.stack([np.prod(phys ** np.array(a, dtype=float), axis=1) for a in exps], axis=1)
    values = out.values[keep]
    coef, *_ = np.linalg.lstsq(basis, values, rcond=None)
    error = float(np.max(np.abs(basis @ coef - values)))
    if degree >= 1:
        tau = reproduction_shift(mask, radius)
        linear = [i for i, a in enumerate(exps) if sum(a) == 1]
        for i in linear:
            axis = exps[i].index(1)
            error = max(error, float(np.max(np.abs(values[:, i] - (phys[:, axis] - tau[axis])))))
    return error


@dataclass
class ConvergenceReport:
    sum_rules: int
    k: int
    alpha: Tuple[float, float]
    tau: Tuple[float, float]
    rate: Tuple[float, float]
    verdict: int
    route: str
    depth: int

    def to_dict(self) -> Dict:
        return {
            "sum_rules": self.sum_rules,
            "k": self.k,
            "alpha_C": list(self.alpha),
            "tau": list(self.tau),
            "rate": list(self.rate),
            "converges_in_C": self.verdict,
            "route": self.route,
            "depth": self.depth,
        }


def convergence_report(mask: Mask, depth: int = 14, omega_depth: int = 14) -> ConvergenceReport:
    """
    τ_k = ρ_C · m^{k/d}，广义收敛速率 k − (1/d) log_m τ 即 Hölder 区间
    结论：C^j 收敛，j 为严格小于 α 下界的最大整数且不超过和规则阶数（取整规则见 DESIGN.md 决定 5）
    τ 的缩放用 holder_C 实际取到的 W_k 次数 k，而不是 B 样条阶数 n
    """
    est = holder_C(mask, depth, omega_depth)
    bracket = est.bracket
    d = mask.dim
    m = mask.m
    scale = m ** (est.k / d)
    tau = (bracket.lower * scale, bracket.upper * scale)
    order = sum_rules_order(mask)
    verdict = int(np.ceil(est.lower - VERDICT_TOL) - 1)
    verdict = max(-1, min(verdict, order))
    return ConvergenceReport(sum_rules=order, k=est.k, alpha=est.interval, tau=tau,
                             rate=est.interval, verdict=verdict, route=est.route, depth=depth)


def _dense(net: ControlNet) -> np.ndarray:
    lo = net.indices.min(axis=0)
    shape = tuple(int(x) for x in net.indices.max(axis=0) - lo + 1)
    arr = np.zeros(shape)
    arr[tuple((net.indices - lo).T)] = net.values[:, 0]
    return arr


def difference_norms(mask: Mask, q_max: int, order: int) -> List[float]:
    """S^q δ 沿坐标方向 order 阶差分的 sup 范数，q = 0..q_max"""
    net = delta_net(mask.dim)
    out = []
    for q in range(q_max + 1):
        if q > 0:
            net = subdivide_step(mask, net)
        arr = np.pad(_dense(net), order)
        out.append(max(float(np.max(np.abs(np.diff(arr, n=order, axis=i)))) for i in range(mask.dim)))
    return out


def empirical_rate(mask: Mask, r: int = 0, q_max: int = 14, q_min: int = 3) -> float:
    """
    (n+1) 阶差分（n 为和规则阶数）乘以 ρ(M)^{qr} 后按 q 做对数线性拟合，
    回归中加入 (−1)^q 项吸收两步周期的格点各向异性；返回值以 Hölder 单位计（α − r）
    """
    n = sum_rules_order(mask)
    if r > n:
        raise ValidationError(f"r = {r} 超过和规则阶数 {n}")
    if q_max - q_min < 3:
        raise ValidationError("拟合区间太短")
    norms = difference_norms(mask, q_max, n + 1)
    rho = mask.M.spectral_radius
    qs = np.arange(q_min, q_max + 1)
    logs = np.array([np.log(norms[q]) + q * r * np.log(rho) for q in qs])
    diffs = np.diff(logs)
    if np.any(diffs > 1e-12):
        get_logger().warning("差分范数不是单调下降的，返回最小二乘拟合结果")
    design = np.stack([np.ones_like(qs, dtype=float), qs.astype(float), (-1.0) ** qs], axis=1)
    coef, *_ = np.linalg.lstsq(design, logs, rcond=None)
    return float(-coef[1] / np.log(rho))


def mesh_quads(net: ControlNet) -> List[Tuple[int, int, int, int]]:
    """网格相邻关系给出的四边形 (k, k+e1, k+e1+e2, k+e2)，下标按 net 顺序"""
    if net.dims != 2:
        raise ValidationError("只有二维控制网可以导出网格")
    lookup = {tuple(int(x) for x in k): i for i, k in enumerate(net.indices)}
    steps = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.int64)
    quads = []
    for i, k in enumerate(net.indices):
        corners = k[None, :] + steps
        if net.period is not None:
            corners = _reduce(corners, net.period)
        ids = [lookup.get(tuple(int(x) for x in c)) for c in corners]
        if all(j is not None for j in ids):
            quads.append((i, ids[0], ids[1], ids[2]))
    return quads


def mesh_export(net: ControlNet, path, file_handler=None) -> Tuple[int, int]:
    """写出 OBJ，返回 (顶点数, 面数)"""
    from ..utils.file_handler import FileHandler
    if net.channels != 3:
        raise ValidationError("导出网格需要 3 个通道（x, y, z）")
    net = net.sorted()
    quads = mesh_quads(net)
    handler = file_handler or FileHandler()
    handler.write_obj(path, net.values, quads)
    return net.size, len(quads)


def torus_net(n: int = 16, deform: float = 0.0, R: float = 2.0, r: float = 1.0) -> ControlNet:
    """n×n 周期控制网，环面嵌入；deform 让管半径随经度起伏"""
    if n < 3:
        raise ValidationError("周期网每个方向至少需要 3 个点")
    t = 2 * np.pi * np.arange(n) / n
    U, V = np.meshgrid(t, t, indexing="ij")
    rad = r * (1.0 + deform * np.cos(3 * U))
    xyz = np.stack([(R + rad * np.cos(V)) * np.cos(U),
                    (R + rad * np.cos(V)) * np.sin(U),
                    rad * np.sin(V)], axis=-1)
    return ControlNet.grid(xyz, boundary="periodic")


def catenoid_net(rows: int = 8, cols: int = 12, height: float = 1.5, sweep: float = np.pi) -> ControlNet:
    """悬链面的一条带（有限网，边界固定）"""
    s = np.linspace(-height, height, rows)
    t = np.linspace(0.0, sweep, cols)
    S, T = np.meshgrid(s, t, indexing="ij")
    xyz = np.stack([np.cosh(S) * np.cos(T), np.cosh(S) * np.sin(T), S], axis=-1)
    return ControlNet.grid(xyz, boundary="held")
