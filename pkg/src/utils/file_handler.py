#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
文件处理工具模块
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import chardet
import numpy as np
from PIL import Image

from ..core.errors import TileSplineError, ValidationError
from .status import get_logger

LOW_CONFIDENCE = 0.5


def _fmt(value: Any) -> str:
    """浮点按 17 位有效数字输出，整数原样"""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


class FileHandler:
    def __init__(self, output_dir: Optional[str] = None):
        self.supported_encodings = ['utf-8', 'gbk', 'gb2312', 'utf-16']
        self.output_dir = Path(output_dir) if output_dir else None

    def resolve(self, file_path) -> Path:
        """相对路径落在 output_dir 下"""
        path = Path(file_path)
        if self.output_dir is not None and not path.is_absolute():
            path = self.output_dir / path
        return path

    def read_file(self, file_path: str) -> str:
        """读取文件内容，自动检测编码"""
        try:
            with open(file_path, 'rb') as f:
                raw_data = f.read()
        except OSError as e:
            raise TileSplineError(f"读取文件失败: {e}")

        detected = chardet.detect(raw_data)
        confidence = detected.get('confidence') or 0.0
        if raw_data and (detected.get('encoding') is None or confidence < LOW_CONFIDENCE):
            get_logger().warning(f"{file_path} 编码检测置信度低（{detected.get('encoding')}, {confidence:.2f}），按 UTF-8 优先尝试")
        encoding = (detected.get('encoding') or 'utf-8').lower()
        if encoding not in self.supported_encodings and encoding != 'ascii':
            encoding = 'utf-8'

        try:
            return raw_data.decode(encoding)
        except UnicodeDecodeError:
            for enc in self.supported_encodings:
                try:
                    return raw_data.decode(enc)
                except UnicodeDecodeError:
                    continue
            get_logger().warning(f"{file_path} 无法按任何支持的编码解码，已丢弃非法字节")
            return raw_data.decode('utf-8', errors='ignore')

    def _open_for_write(self, file_path, binary: bool = False):
        path = self.resolve(file_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            if binary:
                return path, open(path, 'wb')
            return path, open(path, 'w', encoding='utf-8', newline='\n')
        except OSError as e:
            raise TileSplineError(f"写入文件失败: {e}")

    def write_file(self, file_path, content: str) -> Path:
        path, f = self._open_for_write(file_path)
        with f:
            f.write(content)
        return path

    def write_pgm(self, file_path, raster: np.ndarray) -> Path:
        """8 位灰度 PGM（P5）；输入按 [min, max] 线性拉伸，布尔数组直接映射为 0/255"""
        arr = np.asarray(raster)
        if arr.ndim != 2:
            raise ValidationError("PGM 只支持二维数组")
        if arr.dtype == bool:
            img = arr.astype(np.uint8) * 255
        else:
            arr = arr.astype(float)
            lo, hi = float(arr.min()), float(arr.max())
            scale = 255.0 / (hi - lo) if hi > lo else 0.0
            img = np.round((arr - lo) * scale).astype(np.uint8)
        path = self.resolve(file_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(img).save(path, format="PPM")
        except OSError as e:
            raise TileSplineError(f"写入文件失败: {e}")
        return path

    def write_csv(self, file_path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path, f = self._open_for_write(file_path)
        with f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
        return path

    def write_obj(self, file_path, vertices: np.ndarray, quads: Sequence[Sequence[int]]) -> Path:
        """ASCII OBJ：v x y z，f a b c d（从 1 开始）"""
        lines = [f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}" for x, y, z in np.asarray(vertices, dtype=float)]
        lines += ["f " + " ".join(str(int(i) + 1) for i in quad) for quad in quads]
        return self.write_file(file_path, "\n".join(lines) + "\n")

    def write_json(self, file_path, obj: Any) -> Path:
        return self.write_file(file_path, json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n")

    def read_json(self, file_path) -> Any:
        try:
            return json.loads(self.read_file(file_path))
        except json.JSONDecodeError as e:
            raise ValidationError(f"JSON 解析失败: {e}")

    def read_control_net(self, file_path, boundary: str = "zero"):
        """
        CSV：表头后每行 j1[,j2],x[,y,z]；OBJ：顶点按行优先排列，
        网格尺寸由注释 '# grid rows cols' 给出
        """
        from ..core.subdivision import ControlNet

        path = Path(file_path)
        text = self.read_file(path)
        if path.suffix.lower() == '.obj':
            return self._parse_obj(text, boundary)
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValidationError(f"控制网文件为空: {path}")
        header, body = rows[0], [r for r in rows[1:] if r]
        dims = sum(1 for name in header if name.strip().lower().startswith('j'))
        if dims == 0:
            raise ValidationError("CSV 表头需要 j1[,j2] 下标列")
        try:
            data = np.array([[float(x) for x in r] for r in body])
        except ValueError as e:
            raise ValidationError(f"CSV 数值解析失败: {e}")
        indices = data[:, :dims].astype(np.int64)
        values = data[:, dims:]
        net = ControlNet(indices, values, boundary="zero")
        if boundary == "periodic":
            lo = indices.min(axis=0)
            shape = indices.max(axis=0) - lo + 1
            if len(indices) != int(np.prod(shape)):
                raise ValidationError("周期控制网必须是完整的矩形网格")
            return ControlNet.grid(self._to_grid(net, shape, lo), boundary="periodic")
        if boundary == "held":
            from ..core.subdivision import hold_boundary
            return hold_boundary(net)
        return net

    @staticmethod
    def _to_grid(net, shape, lo) -> np.ndarray:
        grid = np.zeros(tuple(int(s) for s in shape) + (net.channels,))
        grid[tuple((net.indices - lo).T)] = net.values
        return grid if len(shape) == 2 else grid.reshape(int(shape[0]), net.channels)

    def _parse_obj(self, text: str, boundary: str):
        from ..core.subdivision import ControlNet

        vertices: List[List[float]] = []
        shape = None
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == '#' and len(parts) == 4 and parts[1] == 'grid':
                shape = (int(parts[2]), int(parts[3]))
            elif parts[0] == 'v':
                vertices.append([float(x) for x in parts[1:4]])
        if shape is None:
            raise ValidationError("OBJ 控制网缺少 '# grid rows cols' 注释")
        if shape[0] * shape[1] != len(vertices):
            raise ValidationError(f"顶点数 {len(vertices)} 与网格 {shape[0]}×{shape[1]} 不符")
        grid = np.array(vertices).reshape(shape[0], shape[1], 3)
        return ControlNet.grid(grid, boundary=boundary)
