#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
正则性计算模块
把转移矩阵限制到与多项式正交的不变子空间 W_k 上，
用联合谱半径区间估计 C 空间 Hölder 指数，用 L₂ 半径的特征值公式计算 L₂ 指数
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from .batch_processor import get_batch_processor
from .errors import (BudgetExceededError, ConvergenceError, DegenerateMaskError,
                     NotComputableError, ValidationError)
from .lattice import DigitSet, is_isotropic
from .mask import bspline_mask, sum_rules_order
from .refine import TransitionFamily, transition_family
from .tile import omega_set
from ..utils.status import get_logger

MAX_DEGREE = 8
INVARIANCE_TOL = 1e-8
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
MAX_PRODUCT_DEPTH = 24
MEMORY_BUDGET = 2 * 1024 ** 3
BALANCE_PASSES = 50
ELLIPSOID_LENGTHS = (1, 2, 3, 4)
PRODUCT_CHUNK = 8192
DENSE_FALLBACK_DIM = 48


@dataclass
class RestrictedPair:
    """T_Δ 在 W_k 上的限制（正交基下），mats 形状 (m, n, n)"""

    mats: np.ndarray
    k: int
    basis: np.ndarray

    @property
    def A0(self) -> np.ndarray:
        return self.mats[0]

    @property
    def A1(self) -> np.ndarray:
        return self.mats[1]

    @property
    def dim(self) -> int:
        return int(self.mats.shape[1])

    @property
    def m(self) -> int:
        return int(self.mats.shape[0])

    def scaled(self, c: float) -> "RestrictedPair":
        return RestrictedPair(self.mats * c, self.k, self.basis)

    @classmethod
    def from_matrices(cls, *mats, k: int = 0) -> "RestrictedPair":
        arr = np.array([np.atleast_2d(np.asarray(a, dtype=float)) for a in mats])
        return cls(arr, k, np.eye(arr.shape[1]))


@dataclass
class JsrBracket:
    lower: float
    upper: float
    depth: int

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class HolderEstimate:
    """Hölder 指数区间及其计算来源"""

    lower: float
    upper: float
    k: int
    depth: int
    route: str = "direct"
    bracket: Optional[JsrBracket] = field(default=None, repr=False)

    @property
    def interval(self) -> Tuple[float, float]:
        return (self.lower, self.upper)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def _monomial_exponents(d: int, degree: int) -> List[Tuple[int, ...]]:
    return [a for a in product(range(degree + 1), repeat=d) if sum(a) <= degree]


def _polynomial_matrix(points: np.ndarray, degree: int) -> np.ndarray:
    """V_j：列为次数 ≤ degree 的单项式在 Ω 上的取值（坐标先做仿射归一化）"""
    pts = points.astype(float)
    center = pts.mean(axis=0)
    scale = max(1.0, float(np.max(np.abs(pts - center))))
    pts = (pts - center) / scale
    cols = [np.prod(pts ** np.array(a, dtype=float), axis=1) for a in _monomial_exponents(pts.shape[1], degree)]
    return np.stack(cols, axis=1)


def _invariance_residual(T: np.ndarray, B: np.ndarray) -> float:
    TB = T @ B
    return float(np.linalg.norm(TB - B @ (B.T @ TB), 2))


def restrict_to_Wk(tf: TransitionFamily, tol: float = INVARIANCE_TOL,
                   max_degree: int = MAX_DEGREE) -> RestrictedPair:
    """
    找最大的 j ≤ max_degree 使 W_j = V_j^⊥ 非零且在所有 T_Δ 下不变，返回限制矩阵
    max_degree 应取掩模的和规则阶数：Ω 很小时 W_j 可能对更高的 j 平凡不变
    """
    points = tf.omega.array
    best: Optional[Tuple[int, np.ndarray]] = None
    for j in range(max_degree + 1):
        V = _polynomial_matrix(points, j)
        B = null_space(V.T)
        if B.shape[1] == 0:
            if j == 0:
                raise NotComputableError("W₀ = {0}：Ω 只有一个单元，当前基瓦片下无法计算")
            break
        residual = max(_invariance_residual(T, B) for T in tf.mats)
        if residual >= tol:
            if j == 0:
                raise DegenerateMaskError(f"W₀ 不是不变子空间（残差 {residual:.3e}），掩模不满足 0 阶和规则")
            break
        best = (j, B)
    k, B = best
    mats = np.array([B.T @ T @ B for T in tf.mats])
    return RestrictedPair(mats=mats, k=k, basis=B)


def _psd_power(apply: Callable[[np.ndarray], np.ndarray], n: int, tol: float,
               max_iter: int, shift_ratio: float = 0.1) -> Tuple[float, np.ndarray]:
    """
    正映射 X ↦ apply(X) 在半正定锥上的幂迭代，初值为单位阵
    加正移位 s 消除模长相同的外围特征值造成的振荡
    """
    X = np.eye(n) / np.sqrt(n)
    Y = apply(X)
    lam = float(np.trace(Y) / np.trace(X))
    if lam <= 0.0:
        return 0.0, X
    shift = shift_ratio * lam
    residual = np.inf
    for _ in range(max_iter):
        Z = Y + shift * X
        X = Z / np.linalg.norm(Z)
        X = 0.5 * (X + X.T)
        Y = apply(X)
        lam = float(np.trace(Y) / np.trace(X))
        residual = float(np.linalg.norm(Y - lam * X))
        if residual <= tol * max(lam, 1e-300):
            return max(lam, 0.0), X
    raise ConvergenceError("L₂ 算子幂迭代未收敛", residual)


def _average_operator(mats: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    m = mats.shape[0]
    return lambda X: sum(A.T @ X @ A for A in mats) / m


def _kron_lambda(pair: RestrictedPair) -> float:
    kron = sum(np.kron(A, A) for A in pair.mats) / pair.m
    return float(np.max(np.abs(np.linalg.eigvals(kron))))


def l2_radius(pair: RestrictedPair, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """
    ρ₂ = sqrt(λ_max((1/m) Σ A_i ⊗ A_i))
    维数 ≤ DENSE_FALLBACK_DIM 时总用稠密 Kronecker 特征值核对幂迭代结果，两者不符时以稠密值为准
    """
    if pair.dim == 0:
        raise NotComputableError("限制空间为零维")
    dense = pair.dim <= DENSE_FALLBACK_DIM
    try:
        lam, _ = _psd_power(_average_operator(pair.mats), pair.dim, tol, max_iter)
    except ConvergenceError as e:
        # 顶端特征值带 Jordan 块时幂迭代只有代数收敛
        if not dense:
            raise
        get_logger().warning(f"幂迭代未收敛（残差 {e.residual:.3e}），改用 Kronecker 矩阵特征值")
        return float(np.sqrt(_kron_lambda(pair)))
    if dense:
        exact = _kron_lambda(pair)
        if abs(exact - lam) > 1e-9 * max(exact, 1e-300):
            get_logger().warning(f"幂迭代 λ = {lam:.12g} 与 Kronecker 特征值 {exact:.12g} 不符，采用后者")
            lam = exact
    return float(np.sqrt(lam))


def _extend(products: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """长度 s 的全部乘积右乘每个 A_i，得到长度 s+1（按最后一位分块）"""
    return np.concatenate([products @ A for A in mats], axis=0)


def _spectral_radii(products: np.ndarray) -> np.ndarray:
    return np.max(np.abs(np.linalg.eigvals(products)), axis=1)


def _norms(products: np.ndarray, L: np.ndarray, L_inv: np.ndarray) -> np.ndarray:
    return np.linalg.norm(L @ products @ L_inv, ord=2, axis=(1, 2))


def _balance(mats: np.ndarray, passes: int = BALANCE_PASSES) -> np.ndarray:
    """对角相似 D A D^{-1} 的坐标下降，使 max_i ‖D A_i D^{-1}‖₂ 尽量小"""
    n = mats.shape[1]
    logd = np.zeros(n)

    def cost(ld: np.ndarray) -> float:
        D = np.exp(ld)
        scaled = mats * D[None, :, None] / D[None, None, :]
        return float(np.max(np.linalg.norm(scaled, ord=2, axis=(1, 2))))

    best = cost(logd)
    step = 1.0
    for _ in range(passes):
        improved = False
        for i in range(n):
            for direction in (step, -step):
                trial = logd.copy()
                trial[i] += direction
                value = cost(trial)
                if value < best - 1e-15:
                    best, logd, improved = value, trial, True
                    break
        if not improved:
            step *= 0.5
    return np.diag(np.exp(logd))


def _ellipsoid(mats: np.ndarray, length: int, eps: float = 1e-10) -> Optional[np.ndarray]:
    """X ↦ Σ_{|σ|=length} P_σᵀ X P_σ 的主特征矩阵给出的椭球范数 ‖x‖ = ‖R x‖"""
    products = mats
    for _ in range(length - 1):
        products = _extend(products, mats)
    n = mats.shape[1]
    try:
        _, X = _psd_power(_average_operator(products), n, 1e-10, 20_000)
    except ConvergenceError:
        return None
    X = X / np.max(np.abs(np.linalg.eigvalsh(X)))
    try:
        R = np.linalg.cholesky(X + eps * np.eye(n)).T
    except np.linalg.LinAlgError:
        return None
    return R


def candidate_norms(pair: RestrictedPair) -> List[Tuple[str, np.ndarray]]:
    """上界所用的范数：欧氏、对角平衡、若干椭球"""
    n = pair.dim
    norms = [("euclidean", np.eye(n)), ("balanced", _balance(pair.mats))]
    for r in ELLIPSOID_LENGTHS:
        if pair.m ** r > 4096:
            break
        R = _ellipsoid(pair.mats, r)
        if R is not None:
            norms.append((f"ellipsoid-{r}", R))
    return norms


def jsr_bracket(pair: RestrictedPair, t: int, max_depth: int = MAX_PRODUCT_DEPTH,
                memory_budget: int = MEMORY_BUDGET) -> JsrBracket:
    """
    lower = max ρ(A_σ)^{1/|σ|}，upper = min_{s,范数} max_{|σ|=s} ‖A_σ‖^{1/s}，|σ| ≤ t
    """
    if t < 1:
        raise ValidationError("乘积深度 t 必须 ≥ 1")
    if t > max_depth:
        raise BudgetExceededError(f"乘积深度 {t} 超过上限 {max_depth}")
    n = pair.dim
    need = (pair.m ** t) * n * n * 8 * 2
    if need > memory_budget:
        raise BudgetExceededError(f"深度 {t} 需要约 {need / 1024 ** 2:.0f} MB，超过内存上限")
    if n == 0:
        raise ValidationError("限制空间为零维")

    norms = [(L, np.linalg.inv(L)) for _, L in candidate_norms(pair)]
    processor = get_batch_processor()
    lower = 0.0
    upper = np.inf
    products = pair.mats.copy()
    for s in range(1, t + 1):
        if s > 1:
            products = _extend(products, pair.mats)
        chunks = [products[i:i + PRODUCT_CHUNK] for i in range(0, products.shape[0], PRODUCT_CHUNK)]

        def stats(chunk: np.ndarray) -> Tuple[float, List[float]]:
            rho = float(np.max(_spectral_radii(chunk)))
            return rho, [float(np.max(_norms(chunk, L, Li))) for L, Li in norms]

        results = processor.map_ordered(stats, chunks)
        rho = max(r for r, _ in results)
        maxnorm = [max(res[1][i] for res in results) for i in range(len(norms))]
        lower = max(lower, rho ** (1.0 / s))
        upper = min(upper, min(maxnorm) ** (1.0 / s))
    # 浮点舍入可能让两端略微交叉
    upper = max(upper, lower)
    return JsrBracket(lower=lower, upper=upper, depth=t)


def _log_base(x: float, base: float) -> float:
    if x <= 0.0:
        return np.inf
    return float(np.log(x) / np.log(base))


def restricted_pair_for(mask, depth: int = 14, tol: float = INVARIANCE_TOL) -> Tuple[RestrictedPair, str]:
    """
    先用生成数字 D，W_k 退化时改用反射基瓦片 −D 重建转移矩阵
    k 不超过和规则阶数
    """
    max_k = max(0, min(sum_rules_order(mask), MAX_DEGREE))
    D = mask.basis_digits()
    tf = transition_family(mask, D, omega_set(mask, D, depth))
    try:
        return restrict_to_Wk(tf, tol, max_k), "direct"
    except NotComputableError:
        reflected = D.negated()
        get_logger().warning("W_k 退化，改用反射基瓦片 −G 重新计算")
        tf = transition_family(mask, reflected, omega_set(mask, reflected, depth))
        try:
            return restrict_to_Wk(tf, tol, max_k), "reflected"
        except NotComputableError:
            raise NotComputableError("在 G 与 −G 两种基瓦片下 W_k 均为 {0}，无法计算正则性")


def holder_C(mask, depth: int = 14, omega_depth: int = 14, tol: float = INVARIANCE_TOL,
             max_depth: int = MAX_PRODUCT_DEPTH) -> HolderEstimate:
    """
    α ∈ [−log_{ρ(M)} upper, −log_{ρ(M)} lower]
    返回的 k 是 W_k 的多项式次数，convergence_report 用它缩放 τ 并按 DESIGN.md 决定 5 取整出收敛阶
    """
    M = mask.M
    if not is_isotropic(M):
        get_logger().warning("M 不是各向同性的，按 ρ(M) 为底的公式得到的只是近似指数")
    pair, route = restricted_pair_for(mask, omega_depth, tol)
    bracket = jsr_bracket(pair, depth, max_depth)
    rho = M.spectral_radius
    lo = -_log_base(bracket.upper, rho)
    hi = -_log_base(bracket.lower, rho)
    return HolderEstimate(lower=lo, upper=hi, k=pair.k, depth=depth, route=route, bracket=bracket)


def holder_L2(mask, omega_depth: int = 14, tol: float = INVARIANCE_TOL,
              power_tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """α₂ = −log_{ρ(M)} ρ₂"""
    pair, _ = restricted_pair_for(mask, omega_depth, tol)
    rho2 = l2_radius(pair, power_tol, max_iter)
    return -_log_base(rho2, mask.M.spectral_radius)


def regularity_table(M, D: DigitSet, orders: Sequence[int], depth: int = 14,
                     omega_depth: int = 14, with_c: bool = True) -> List[Dict]:
    """按阶数列出 (α_C 区间, α₂)"""
    rows = []
    for n in orders:
        mask = bspline_mask(M, D, n)
        row: Dict = {"order": n, "alpha_L2": holder_L2(mask, omega_depth)}
        if with_c:
            est = holder_C(mask, depth, omega_depth)
            row.update({"alpha_C": [est.lower, est.upper], "k": est.k, "route": est.route})
        rows.append(row)
        get_logger().info(f"B{n}: α₂ = {row['alpha_L2']:.4f}")
    return rows
