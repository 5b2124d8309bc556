#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
瓦片 B 样条工具
主程序入口：瓦片、掩模、取值、正则性、正交化、小波、尾项界与细分
"""

import argparse
import sys

from src.cli.commands import CommandRunner, dumps_summary
from src.core.errors import TileSplineError, ValidationError
from src.core.subdivision import BOUNDARY_MODES
from src.utils.status import get_logger

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _add_mask_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--preset", help="预设名（square/dragon/bear/example2/unit1d，或 bear-3 这种写法）")
    sub.add_argument("--order", type=int, help="B 样条阶数 n")
    sub.add_argument("--mask", help="掩模 JSON 文件，优先于 --preset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="瓦片 B 样条：精确求值、正则性、正交化与细分",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
使用示例:
  python main.py --json mask --preset square --order 0
  python main.py --json regularity --preset bear --order 1
  python main.py --json tails --q 0.7 --m 22
  python main.py subdivide --preset bear-4 --iters 4 --boundary periodic
        """
    )
    parser.add_argument("--json", action="store_true", help="以 JSON 输出摘要")
    parser.add_argument("--config", help="配置文件路径（覆盖 config/app_config.json）")
    parser.add_argument("--threads", type=int, help="线程数，0 表示按 CPU 核数")
    parser.add_argument("--quiet", action="store_true", help="只输出警告和错误")
    parser.add_argument("--output-dir", default=".", help="输出目录")

    subparsers = parser.add_subparsers(dest="command", required=True)

    tile = subparsers.add_parser("tile", help="瓦片点云与栅格")
    tile.add_argument("--preset", help="预设名")
    tile.add_argument("--depth", type=int, help="展开深度 p")
    tile.add_argument("--grid", type=int, help="栅格边长")

    mask = subparsers.add_parser("mask", help="细分掩模")
    _add_mask_args(mask)
    mask.add_argument("--symmetrized", action="store_true", help="输出对称化 B 样条的掩模")

    values = subparsers.add_parser("values", help="细化格上的精确取值")
    _add_mask_args(values)
    values.add_argument("--depth", type=int, help="细化深度 q")

    regularity = subparsers.add_parser("regularity", help="Hölder 与 L2 正则性")
    _add_mask_args(regularity)
    regularity.add_argument("--depth", type=int, help="联合谱半径的乘积长度")
    regularity.add_argument("--no-c", action="store_true", help="只计算 L2 指数")

    ortho = subparsers.add_parser("ortho", help="正交化系数")
    _add_mask_args(ortho)
    ortho.add_argument("--grid", type=int, help="FFT 网格大小 N")

    wavelet = subparsers.add_parser("wavelet", help="小波系数、QMF 检验与截断")
    _add_mask_args(wavelet)
    wavelet.add_argument("--grid", type=int, help="FFT 网格大小 N")
    wavelet.add_argument("--q", type=float, help="衰减指数 q（不给则自动搜索）")
    wavelet.add_argument("--m", type=int, help="截断窗口 |k|₁ ≤ m")
    wavelet.add_argument("--norm", choices=["l1", "l2"], help="截断范数")
    wavelet.add_argument("--budget", type=float, help="截断误差预算")
    wavelet.add_argument("--raster", type=int, help="以该深度输出 ψ 的灰度图")

    tails = subparsers.add_parser("tails", help="系数尾项的范数上界")
    tails.add_argument("--q", type=float, help="衰减指数 q")
    tails.add_argument("--C", type=float, help="衰减常数 C")
    tails.add_argument("--m", type=int, help="截断位置 m（不给则输出整张表）")

    subdivide = subparsers.add_parser("subdivide", help="运行细分格式")
    _add_mask_args(subdivide)
    subdivide.add_argument("--iters", type=int, help="细分次数")
    subdivide.add_argument("--input", help="控制网文件（CSV 或 OBJ）")
    subdivide.add_argument("--boundary", choices=list(BOUNDARY_MODES), help="边界处理方式")
    subdivide.add_argument("--report", action="store_true", help="附带收敛性报告")
    subdivide.add_argument("--depth", type=int, help="收敛性报告的乘积长度")
    return parser


def format_summary(summary) -> str:
    """非 JSON 模式下的逐行输出"""
    lines = []
    for key in sorted(summary):
        lines.append(f"{key}: {summary[key]}")
    return "\n".join(lines)


def main(argv=None) -> int:
    """主函数"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_logger()
    try:
        runner = CommandRunner(config_file=args.config, output_dir=args.output_dir,
                               threads=args.threads, quiet=args.quiet)
        summary = runner.run(args.command, args)
    except ValidationError as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except TileSplineError as e:
        logger.error(str(e))
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        logger.warning("用户中断")
        return EXIT_NUMERIC

    print(dumps_summary(summary) if args.json else format_summary(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
