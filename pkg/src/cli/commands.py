#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行子命令
每个子命令串起对应模块的计算流程，写出声明的文件并返回 JSON 摘要
"""

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..config.config_manager import ConfigManager
from ..core.batch_processor import get_batch_processor
from ..core.errors import ValidationError
from ..core.mask import (Mask, bear_name_to_order, bspline_mask, mask_from_json, mask_to_json,
                         nonzero_count, sum_rules_order, symmetrized_bspline_mask)
from ..core.ortho import orthogonalize, riesz_bounds, gram_check
from ..core.refine import build_evaluator, lattice_to_rows, partition_of_unity_deviation, refine_values
from ..core.regularity import holder_C, holder_L2
from ..core.subdivision import (ControlNet, catenoid_net, convergence_report, delta_net, mesh_export,
                                run_scheme, torus_net)
from ..core.tile import (attractor_bbox, central_symmetry_defect, raster_measure, render_tile,
                         tile_center, tile_points)
from ..core.wavelet import (decay_certificate, find_q, tail_bounds, tail_table, truncate_coeffs,
                            verify_qmf, wavelet_coeffs, wavelet_values)
from ..utils.file_handler import FileHandler
from ..utils.status import get_logger, set_quiet


def to_jsonable(obj: Any) -> Any:
    """numpy 标量 / 数组、Fraction、元组统一转成 JSON 类型"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else str(value)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps_summary(summary: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(summary), ensure_ascii=False, sort_keys=True, indent=2)


class CommandRunner:
    """子命令执行器：持有配置、文件处理器与日志"""

    def __init__(self, config_file: Optional[str] = None, output_dir: Optional[str] = None,
                 threads: Optional[int] = None, quiet: bool = False):
        set_quiet(quiet)
        self.logger = get_logger()
        self.config_manager = ConfigManager(config_file=config_file)
        self.config_manager.override(threads=threads)
        self.config = self.config_manager.get_app_config()
        self.file_handler = FileHandler(output_dir or ".")
        get_batch_processor(self.config["threads"])
        self.commands: Dict[str, Callable[[Any], Dict[str, Any]]] = {
            "tile": self.cmd_tile,
            "mask": self.cmd_mask,
            "values": self.cmd_values,
            "regularity": self.cmd_regularity,
            "ortho": self.cmd_ortho,
            "wavelet": self.cmd_wavelet,
            "tails": self.cmd_tails,
            "subdivide": self.cmd_subdivide,
        }

    def run(self, name: str, args) -> Dict[str, Any]:
        if name not in self.commands:
            raise ValidationError(f"未知子命令: {name}")
        self.logger.info(f"开始执行 {name}")
        summary = self.commands[name](args)
        summary["command"] = name
        self.logger.success(f"{name} 完成")
        return summary

    def _value(self, args, attr: str, key: str):
        given = getattr(args, attr, None)
        return self.config[key] if given is None else given

    def _evaluator(self, mask: Mask):
        return build_evaluator(mask, depth=self.config["omega_depth"], eig_tol=self.config["eig_tol"],
                               residual_tol=self.config["residual_tol"])

    def resolve_mask(self, args, order_default: int = 1) -> Mask:
        """--mask 文件优先，其次 --preset（可写成 bear-3）与 --order"""
        mask_file = getattr(args, "mask", None)
        if mask_file:
            return mask_from_json(self.file_handler.read_json(mask_file))
        name = getattr(args, "preset", None) or "bear"
        order = getattr(args, "order", None)
        if "-" in name:
            name, order = bear_name_to_order(name)
        order = order_default if order is None else order
        M, D = self.config_manager.get_preset(name)
        mask = bspline_mask(M, D, order)
        return mask.with_order(order, name=f"{name}-B{order}")

    def _tag(self, mask: Mask) -> str:
        return (mask.name or "mask").replace("/", "_")

    def cmd_tile(self, args) -> Dict[str, Any]:
        name = args.preset or "bear"
        M, D = self.config_manager.get_preset(name)
        p = self._value(args, "depth", "tile_depth")
        size = self._value(args, "grid", "raster_grid")
        approx = tile_points(M, D, p, self.config["max_points"])
        raster = render_tile(M, D, size, size, p, self.config["max_points"])
        path = self.file_handler.write_pgm(f"tile_{name}_p{p}.pgm", raster.astype(bool))
        summary = {
            "preset": name,
            "depth": p,
            "points": approx.size,
            "bbox": [approx.bbox[0], approx.bbox[1]],
            "attractor_bbox": list(attractor_bbox(M, D)),
            "raster_measure": raster_measure(raster, approx.bbox),
            "outputs": [str(path)],
        }
        if M.det_abs == 2:
            summary["center"] = tile_center(M, D)
            summary["symmetry_defect"] = central_symmetry_defect(M, D, min(p, 14))
        return summary

    def cmd_mask(self, args) -> Dict[str, Any]:
        mask = self.resolve_mask(args, order_default=0)
        if getattr(args, "symmetrized", False):
            mask = symmetrized_bspline_mask(mask.M, mask.basis_digits(), mask.order or 0)
        path = self.file_handler.write_json(f"mask_{self._tag(mask)}.json", mask_to_json(mask))
        return {
            "name": mask.name,
            "order": mask.order,
            "count": nonzero_count(mask),
            "coeffs": [[list(k), str(c)] for k, c in mask.coeffs.items()],
            "sum_rules": sum_rules_order(mask, self.config["sum_rule_tol"]),
            "outputs": [str(path)],
        }

    def cmd_values(self, args) -> Dict[str, Any]:
        mask = self.resolve_mask(args)
        q = self._value(args, "depth", "lattice_depth")
        tf, v = self._evaluator(mask)
        lf = refine_values(tf, v, q)
        header = [f"j{i + 1}" for i in range(mask.dim)] + ["value"]
        path = self.file_handler.write_csv(f"values_{self._tag(mask)}_q{q}.csv", header, lattice_to_rows(lf))
        return {
            "name": mask.name,
            "depth": q,
            "omega": [list(a) for a in tf.omega.elems],
            "integer_values": v,
            "points": lf.size,
            "max_value": float(lf.values.max()),
            "partition_of_unity": partition_of_unity_deviation(tf, v, min(q, 8)),
            "outputs": [str(path)],
        }

    def _preset_name(self, args, mask: Mask) -> Optional[str]:
        if getattr(args, "mask", None):
            return mask.name
        return (mask.name or "").rsplit("-B", 1)[0] or None

    def cmd_regularity(self, args) -> Dict[str, Any]:
        """输出键固定为 preset / order / alpha_C / alpha_L2 / k / depth，--no-c 时后三者为 null"""
        mask = self.resolve_mask(args)
        depth = self._value(args, "depth", "jsr_depth")
        omega_depth = self.config["omega_depth"]
        self.logger.info(f"和规则阶数 {sum_rules_order(mask, self.config['sum_rule_tol'])}")
        summary: Dict[str, Any] = {
            "preset": self._preset_name(args, mask),
            "order": mask.order,
            "alpha_C": None,
            "alpha_L2": holder_L2(mask, omega_depth, self.config["invariance_tol"],
                                  self.config["power_tol"], self.config["power_max_iter"]),
            "k": None,
            "depth": None,
        }
        if not getattr(args, "no_c", False):
            est = holder_C(mask, depth, omega_depth, self.config["invariance_tol"],
                           self.config["max_products_depth"])
            self.logger.info(f"JSR ∈ [{est.bracket.lower:.6f}, {est.bracket.upper:.6f}]，基瓦片 {est.route}")
            summary.update({"alpha_C": list(est.interval), "k": est.k, "depth": depth})
        return summary

    def cmd_ortho(self, args) -> Dict[str, Any]:
        mask = self.resolve_mask(args)
        N = self._value(args, "grid", "grid_1d" if mask.dim == 1 else "grid_2d")
        phi, b, c1 = orthogonalize(mask, N, self.config["omega_depth"], self.config["truncation_eps"])
        header = [f"k{i + 1}" for i in range(mask.dim)] + ["c"]
        rows = [list(k) + [c] for k, c in c1.sorted_rows()]
        path = self.file_handler.write_csv(f"ortho_{self._tag(mask)}_N{N}.csv", header, rows)
        lo, hi = riesz_bounds(phi)
        return {
            "name": mask.name,
            "grid": N,
            "phi": [[list(k), c] for k, c in phi.coeffs.items()],
            "riesz": [lo, hi],
            "gram_deviation": gram_check(b, phi),
            "leading": [[list(k), c] for k, c in c1.sorted_rows()[:10]],
            "count": c1.size,
            "sum": c1.total(),
            "outputs": [str(path)],
        }

    def cmd_wavelet(self, args) -> Dict[str, Any]:
        mask = self.resolve_mask(args)
        M = mask.M
        N = self._value(args, "grid", "grid_1d" if mask.dim == 1 else "grid_2d")
        phi, b, c1 = orthogonalize(mask, N, self.config["omega_depth"], self.config["truncation_eps"])
        q = getattr(args, "q", None)
        if q is None and mask.dim == 2:
            q = find_q(phi, M, self.config["q_step"], self.config["q_radii"],
                       self.config["q_angles"], self.config["q_threshold"])
        if q is not None and q < 1.0:
            decay_certificate(c1, q)
        ws = wavelet_coeffs(c1, M, inv_sqrt=b)
        dev1, dev2 = verify_qmf(ws, min(N, 256))
        header = [f"k{i + 1}" for i in range(mask.dim)] + ["psi"]
        rows = [list(k) + [c] for k, c in ws.psi.sorted_rows()]
        outputs = [str(self.file_handler.write_csv(f"wavelet_{self._tag(mask)}.csv", header, rows))]
        summary: Dict[str, Any] = {
            "name": mask.name,
            "u": list(ws.u),
            "v": list(ws.v),
            "shift": list(ws.shift),
            "sign_rule": ws.sign_rule,
            "q": q,
            "C": c1.C,
            "qmf": [dev1, dev2],
        }
        if q is not None and q < 1.0:
            rows = tail_table(q, self.config["tail_C"])
            summary["tails"] = [list(r) for r in rows]
            outputs.append(str(self.file_handler.write_csv(f"wavelet_{self._tag(mask)}_tails_q{q}.csv",
                                                           ["m", "H1", "H2"], rows)))
        budget = getattr(args, "budget", None)
        if budget is not None:
            m_cut = getattr(args, "m", None) or 22
            kept = truncate_coeffs(ws.psi, budget, args.norm or "l2", m_cut, q, self.config["tail_C"])
            summary["truncation"] = {"kept": kept.size, **kept.meta, "norm_bound": kept.norm_tail}
        raster_depth = getattr(args, "raster", None)
        if raster_depth:
            tf, v = self._evaluator(mask)
            lf = wavelet_values(ws, tf, v, raster_depth).window(self.config["wavelet_window"])
            if lf.size == 0:
                raise ValidationError(f"窗口 {self.config['wavelet_window']} 内没有格点")
            dense, _ = lf.to_dense()
            if dense.ndim == 1:
                dense = np.tile(dense, (16, 1))
            outputs.append(str(self.file_handler.write_pgm(f"wavelet_{self._tag(mask)}_q{raster_depth}.pgm", dense)))
        summary["outputs"] = outputs
        return summary

    def cmd_tails(self, args) -> Dict[str, Any]:
        q = args.q if args.q is not None else 0.7
        C = self._value(args, "C", "tail_C")
        if getattr(args, "m", None) is not None:
            h1, h2 = tail_bounds(q, C, args.m)
            return {"q": q, "C": C, "m": args.m, "H1": h1, "H2": h2}
        rows = tail_table(q, C)
        path = self.file_handler.write_csv(f"tails_q{q}.csv", ["m", "H1", "H2"], rows)
        return {"q": q, "C": C, "table": [list(r) for r in rows], "outputs": [str(path)]}

    def _initial_net(self, args, mask: Mask) -> ControlNet:
        boundary = args.boundary or "zero"
        if args.input:
            return self.file_handler.read_control_net(args.input, boundary)
        if boundary == "periodic":
            return torus_net(16, deform=0.2)
        if boundary == "held":
            return catenoid_net()
        return delta_net(mask.dim)

    def cmd_subdivide(self, args) -> Dict[str, Any]:
        mask = self.resolve_mask(args, order_default=3)
        iters = args.iters if args.iters is not None else 3
        net = self._initial_net(args, mask)
        out = run_scheme(mask, net, iters, self.config["max_points"])
        tag = f"subdivide_{self._tag(mask)}_{net.boundary}_q{iters}"
        summary: Dict[str, Any] = {
            "name": mask.name,
            "iters": iters,
            "boundary": net.boundary,
            "input_points": net.size,
            "points": out.size,
            "nonzero_coefficients": nonzero_count(mask),
        }
        if out.dims == 2 and out.channels == 3:
            vertices, faces = mesh_export(out, Path(tag + ".obj"), self.file_handler)
            summary.update({"vertices": vertices, "faces": faces})
            path = self.file_handler.resolve(tag + ".obj")
        else:
            srt = out.sorted()
            header = [f"j{i + 1}" for i in range(out.dims)] + [f"x{i + 1}" for i in range(out.channels)]
            rows = [list(k) + list(val) for k, val in zip(srt.indices, srt.values)]
            path = self.file_handler.write_csv(tag + ".csv", header, rows)
        summary["outputs"] = [str(path)]
        if getattr(args, "report", False):
            summary["report"] = convergence_report(mask, self._value(args, "depth", "jsr_depth"),
                                                   self.config["omega_depth"]).to_dict()
        return summary
