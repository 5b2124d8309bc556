#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
正则性表与尾项界表一键复现工具
逐个预设计算 α_C 区间与 α₂，然后输出 q = 0.7 / 0.85 的尾项界
"""

import argparse
import sys
from pathlib import Path

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.lattice import preset  # noqa: E402
from src.core.regularity import regularity_table  # noqa: E402
from src.core.wavelet import tail_table  # noqa: E402


def print_regularity(names, orders, depth: int, with_c: bool) -> None:
    print(f"\n{'=' * 60}")
    print("正则性表")
    print(f"{'=' * 60}")
    for name in names:
        M, D = preset(name)
        rows = regularity_table(M, D, orders, depth=depth, with_c=with_c)
        for row in rows:
            line = f"{name:<8} B{row['order']}  α₂ = {row['alpha_L2']:.4f}"
            if with_c:
                lo, hi = row["alpha_C"]
                line += f"  α_C ∈ [{lo:.4f}, {hi:.4f}]  ({row['route']})"
            print(line)


def print_tails() -> None:
    print(f"\n{'=' * 60}")
    print("尾项界")
    print(f"{'=' * 60}")
    for q in (0.7, 0.85):
        print(f"q = {q}")
        for m, h1, h2 in tail_table(q):
            print(f"  m = {m:>2}  H1 = {h1:.6g}  H2 = {h2:.6g}")


def main():
    parser = argparse.ArgumentParser(description="复现正则性表与尾项界表")
    parser.add_argument("--presets", default="square,dragon,bear", help="逗号分隔的预设名")
    parser.add_argument("--orders", default="0,1,2,3,4", help="逗号分隔的阶数")
    parser.add_argument("--depth", type=int, default=14, help="联合谱半径的乘积长度")
    parser.add_argument("--l2-only", action="store_true", help="跳过 C 正则性")
    args = parser.parse_args()

    names = [s.strip() for s in args.presets.split(",") if s.strip()]
    orders = [int(s) for s in args.orders.split(",") if s.strip()]
    print_regularity(names, orders, args.depth, not args.l2_only)
    print_tails()


if __name__ == "__main__":
    main()
