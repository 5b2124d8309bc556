#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常定义模块
校验类错误对应 CLI 退出码 2，数值类错误对应退出码 3
"""

from typing import Optional


class TileSplineError(Exception):
    """所有库内错误的基类"""

    exit_code = 3


class ValidationError(TileSplineError):
    """输入不合法"""

    exit_code = 2


class DimensionError(ValidationError):
    """矩阵非方阵或维数不匹配"""


class DigitSetError(ValidationError):
    """数字集不合法"""


class ConfigError(ValidationError):
    """配置项未知或类型错误"""


class UnsupportedError(ValidationError):
    """当前输入不支持该操作"""


class BudgetExceededError(ValidationError):
    """超出点数/乘积数/内存上限"""


class NumericError(TileSplineError):
    """数值计算失败"""


class DegenerateMaskError(NumericError):
    """掩模退化：缺少特征值 1 或 W_0 不变性不成立"""


class AmbiguityError(NumericError):
    """特征值 1 的特征空间维数大于 1"""


class RieszFailureError(NumericError):
    """Φ 不是严格正的"""


class ConvergenceError(NumericError):
    """迭代未收敛"""

    def __init__(self, message: str, residual: Optional[float] = None):
        if residual is not None:
            message = f"{message} (残差 {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NotComputableError(NumericError):
    """在当前 Ω 上无法计算"""
