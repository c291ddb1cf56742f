#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
训练工具模块
Adam优化器、mini-batch划分、随机数流与有限差分梯度检查
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .config import config
from .errors import DataError, NumericError
from .logger_config import get_logger

logger = get_logger(__name__)

Params = Dict[str, np.ndarray]


@dataclass
class AdamState:
    """Adam的一阶/二阶矩累积量与步数"""
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)

    @classmethod
    def create(cls, params: Params, alpha: float) -> "AdamState":
        """按参数形状初始化零累积量"""
        state = cls(alpha=alpha, **config.adam_params)
        for name, value in params.items():
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        return state


def adam_step(params: Params, grads: Params, state: AdamState) -> Tuple[Params, AdamState]:
    """带偏差修正的Adam更新，返回新参数（原数组不被修改）"""
    if set(params) != set(grads):
        raise DataError(f"参数与梯度的名称不一致: {sorted(params)} vs {sorted(grads)}")

    state.step += 1
    t = state.step
    updated = {}
    for name in sorted(params):
        p, g = params[name], grads[name]
        if p.shape != g.shape:
            raise DataError(f"参数 {name} 形状 {p.shape} 与梯度形状 {g.shape} 不一致")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = state.beta1 * state.m[name] + (1 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = state.m[name] / (1 - state.beta1 ** t)
        v_hat = state.v[name] / (1 - state.beta2 ** t)
        updated[name] = p - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated, state


@dataclass(frozen=True)
class BatchSpec:
    """mini-batch划分方式：按比例 fraction 或按大小 count"""
    mode: str = "fraction"
    value: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.mode == "fraction":
            if not 0 < self.value <= 1:
                raise DataError(f"batch 比例必须在 (0, 1] 内: {self.value}")
        elif self.mode == "count":
            if int(self.value) < 1:
                raise DataError(f"batch 大小必须至少为 1: {self.value}")
        else:
            raise DataError(f"未知的 batch 模式: {self.mode}")

    @classmethod
    def fraction(cls, f: float, seed: int = 0) -> "BatchSpec":
        return cls("fraction", float(f), seed)

    @classmethod
    def count(cls, n: int, seed: int = 0) -> "BatchSpec":
        return cls("count", int(n), seed)


def stream_rng(*keys: int) -> np.random.Generator:
    """按整数键派生独立随机数流，例如 (seed, epoch) 或 (seed, step, sample)"""
    return np.random.default_rng([int(k) & 0xFFFFFFFF for k in keys])


def minibatch_iter(size: int, spec: BatchSpec, epoch: int) -> List[np.ndarray]:
    """一个epoch内的索引划分，每个索引恰好出现一次"""
    if size < 1:
        raise DataError(f"数据集大小必须至少为 1: {size}")
    order = stream_rng(spec.seed, epoch).permutation(size)
    if spec.mode == "fraction":
        n_batches = min(size, math.ceil(1 / spec.value - 1e-9))
    else:
        n_batches = math.ceil(size / int(spec.value))
    return [chunk for chunk in np.array_split(order, n_batches) if chunk.size]


@dataclass
class GradCheckReport:
    """有限差分检查结果"""
    max_rel_error: Dict[str, float] = field(default_factory=dict)
    flagged: Dict[str, List[Tuple[int, ...]]] = field(default_factory=dict)
    checked: int = 0
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return not any(self.flagged.values())

    @property
    def stable_fraction_ok(self) -> float:
        """通过检查的坐标比例"""
        bad = sum(len(v) for v in self.flagged.values())
        return 1.0 if self.checked == 0 else 1 - bad / self.checked


def grad_check(loss_fn: Callable[[Params], float],
               grad_fn: Callable[[Params], Params],
               params: Params,
               eps: float = None,
               tol: float = None,
               path_fn: Optional[Callable[[Params], object]] = None,
               max_coords: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> GradCheckReport:
    """中心差分对比解析梯度

    path_fn 返回当前参数下的DTW对齐（任意可比较对象）。扰动后对齐变化的坐标
    不可与包络次梯度比较，直接跳过。max_coords 限制每个张量抽查的坐标数。
    """
    eps = config.grad_check_eps if eps is None else eps
    tol = config.grad_check_tol if tol is None else tol

    base_loss = loss_fn(params)
    if not np.isfinite(base_loss):
        raise NumericError(f"基准点损失非有限: {base_loss}")
    analytic = grad_fn(params)
    base_path = _path_key(path_fn(params)) if path_fn else None
    report = GradCheckReport()

    for name in sorted(params):
        value = params[name]
        coords = list(np.ndindex(value.shape))
        if max_coords is not None and len(coords) > max_coords:
            picker = rng if rng is not None else np.random.default_rng(0)
            chosen = picker.choice(len(coords), size=max_coords, replace=False)
            coords = [coords[i] for i in sorted(chosen)]

        worst = 0.0
        flagged = []
        for coord in coords:
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][coord] += eps
            minus[name][coord] -= eps

            if path_fn is not None:
                if _path_key(path_fn(plus)) != base_path or _path_key(path_fn(minus)) != base_path:
                    report.skipped += 1
                    continue

            f_plus, f_minus = loss_fn(plus), loss_fn(minus)
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError(f"扰动点损失非有限: {name}{coord}")
            numeric = (f_plus - f_minus) / (2 * eps)
            exact = float(analytic[name][coord])
            rel = abs(numeric - exact) / max(1.0, abs(numeric), abs(exact))
            report.checked += 1
            worst = max(worst, rel)
            if rel > tol:
                flagged.append(coord)

        report.max_rel_error[name] = worst
        report.flagged[name] = flagged

    logger.debug(f"梯度检查: checked={report.checked} skipped={report.skipped} "
                 f"max_rel={report.max_rel_error}")
    return report


def _path_key(paths) -> object:
    """把对齐（或对齐列表）转换为可比较的键"""
    if isinstance(paths, np.ndarray):
        return paths.tobytes() + bytes(str(paths.shape), "ascii")
    if isinstance(paths, (list, tuple)):
        return tuple(_path_key(p) for p in paths)
    return paths
