#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置管理模块
负责数值参数（容差、深度、网格尺寸）与预设矩阵的本地存储和管理
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..core.errors import ConfigError, ValidationError
from ..core.lattice import DigitSet, DilationMatrix, preset as builtin_preset, preset_names, register_preset
from ..utils.status import get_logger


def _default_config_dir() -> Path:
    """配置目录：优先环境变量 TILESPLINE_CONFIG_DIR，否则为项目根目录下的 config"""
    env_dir = os.environ.get("TILESPLINE_CONFIG_DIR")
    if env_dir:
        return Path(env_dir)
    return Path(__file__).resolve().parents[2] / "config"


class ConfigManager:
    def __init__(self, config_dir: Optional[Path] = None, config_file: Optional[str] = None):
        self.config_dir = Path(config_dir) if config_dir else _default_config_dir()

        # 配置文件路径
        self.app_config_file = self.config_dir / "app_config.json"
        self.presets_file = self.config_dir / "presets.json"

        # 默认配置
        self.default_app_config = {
            "tail_C": 1.0,
            "grid_2d": 256,
            "grid_1d": 4096,
            "jsr_depth": 14,
            "omega_depth": 14,
            "tile_depth": 16,
            "raster_grid": 256,
            "eig_tol": 1e-10,
            "residual_tol": 1e-12,
            "invariance_tol": 1e-8,
            "sum_rule_tol": 1e-8,
            "power_tol": 1e-12,
            "power_max_iter": 100000,
            "q_step": 0.005,
            "q_radii": 64,
            "q_angles": 512,
            "q_threshold": 1e-6,
            "truncation_eps": 1e-12,
            "max_points": 10_000_000,
            "max_products_depth": 24,
            "threads": 0,
            "wavelet_window": 3.0,
            "lattice_depth": 6,
        }

        # 加载配置
        self.app_config = self.load_app_config()
        self.presets = self.load_presets()
        if config_file:
            self.app_config = self.merge(self.app_config, self._read_json(Path(config_file)))

    def _read_json(self, path: Path) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"配置文件不存在: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件 {path} 不是合法 JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件 {path} 顶层必须是对象")
        return data

    def validate(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """未知键报错；取值类型必须与默认值一致（浮点项接受整数）"""
        checked = {}
        for key, value in config.items():
            if key.startswith("_"):
                continue
            if key not in self.default_app_config:
                raise ConfigError(f"未知配置项: {key}")
            default = self.default_app_config[key]
            if isinstance(value, bool) or value is None:
                raise ConfigError(f"配置项 {key} 的类型错误: {value!r}")
            if isinstance(default, float):
                if not isinstance(value, (int, float)):
                    raise ConfigError(f"配置项 {key} 应为数值，实际为 {value!r}")
                value = float(value)
            elif isinstance(default, int) and not isinstance(value, int):
                raise ConfigError(f"配置项 {key} 应为整数，实际为 {value!r}")
            checked[key] = value
        return checked

    def merge(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        merged = dict(base)
        merged.update(self.validate(override))
        return merged

    def load_app_config(self) -> Dict[str, Any]:
        """加载应用配置，合并默认值"""
        merged = self.default_app_config.copy()
        if self.app_config_file.exists():
            merged.update(self.validate(self._read_json(self.app_config_file)))
        return merged

    def save_app_config(self, config: Dict[str, Any]) -> bool:
        """保存应用配置"""
        try:
            self.config_dir.mkdir(parents=True, exist_ok=True)
            with open(self.app_config_file, "w", encoding="utf-8") as f:
                json.dump(self.validate(config), f, ensure_ascii=False, indent=2, sort_keys=True)
            self.app_config = self.merge(self.default_app_config, config)
            return True
        except OSError as e:
            get_logger().error(f"保存应用配置失败: {e}")
            return False

    def load_presets(self) -> Dict[str, Dict[str, List]]:
        """读取 presets.json 并注册到格模块的预设表"""
        if not self.presets_file.exists():
            return {}
        data = self._read_json(self.presets_file)
        presets = {}
        for name, entry in data.items():
            if name.startswith("_"):
                continue
            try:
                register_preset(name, entry["matrix"], entry["digits"])
            except (KeyError, TypeError) as e:
                raise ConfigError(f"预设 {name} 格式错误: {e}")
            except ValidationError as e:
                raise ConfigError(f"预设 {name} 无效: {e}")
            presets[name.lower()] = entry
        return presets

    def get(self, key: str) -> Any:
        if key not in self.app_config:
            raise ConfigError(f"未知配置项: {key}")
        return self.app_config[key]

    def override(self, **values) -> None:
        """命令行参数覆盖文件中的值；None 表示未指定"""
        given = {k: v for k, v in values.items() if v is not None}
        self.app_config = self.merge(self.app_config, given)

    def get_app_config(self) -> Dict[str, Any]:
        """获取应用配置"""
        return self.app_config.copy()

    def get_preset(self, name: str) -> Tuple[DilationMatrix, DigitSet]:
        return builtin_preset(name)

    def preset_names(self) -> List[str]:
        return preset_names()
