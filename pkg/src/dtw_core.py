#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
DTW核心模块
代价矩阵、带回溯的动态规划对齐、Sakoe-Chiba带约束、对齐路径上的次梯度

序列统一为 (τ, m) 的 float64 数组，对齐为 0 基的 (L, 2) 整型数组，
每一行是 (t1, t2)，分别索引第一条与第二条序列。
"""

from dataclasses import dataclass
from typing import Tuple, Dict, Any

import numpy as np

from .errors import DataError, NumericError
from .logger_config import get_logger

logger = get_logger(__name__)

# 回溯方向编码，平局时按 对角 > 纵向(推进s1) > 横向(推进s2) 选择
STEP_DIAG = 0
STEP_UP = 1
STEP_LEFT = 2


def _accumulate_py(local_cost: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """纯Python的动态规划填表（numba 不可用时使用）"""
    n1, n2 = local_cost.shape
    acc = np.full((n1 + 1, n2 + 1), np.inf)
    step = np.zeros((n1 + 1, n2 + 1), dtype=np.int8)
    acc[0, 0] = 0.0
    for i in range(1, n1 + 1):
        for j in range(1, n2 + 1):
            if not mask[i - 1, j - 1]:
                continue
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                best, direction = diag, STEP_DIAG
            elif up <= left:
                best, direction = up, STEP_UP
            else:
                best, direction = left, STEP_LEFT
            acc[i, j] = local_cost[i - 1, j - 1] + best
            step[i, j] = direction
    return acc, step


try:
    import numba as _nb

    _accumulate = _nb.njit(cache=True, nogil=True)(_accumulate_py)
    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover
    _accumulate = _accumulate_py
    NUMBA_ENABLED = False


@dataclass(frozen=True)
class BandConstraint:
    """DTW窗口约束

    kind 为 "none" 或 "sakoe_chiba"；后者允许格子 (i, j)（1 基）当且仅当
    |i·τ2/τ1 − j| ≤ width，长度不等时仍可行。
    """
    kind: str = "none"
    width: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "sakoe_chiba"):
            raise DataError(f"未知的带约束类型: {self.kind}")
        if self.width < 0:
            raise DataError(f"带宽不能为负: {self.width}")

    @classmethod
    def none(cls) -> "BandConstraint":
        return cls("none", 0)

    @classmethod
    def sakoe_chiba(cls, width: int) -> "BandConstraint":
        return cls("sakoe_chiba", int(width))

    @property
    def active(self) -> bool:
        return self.kind == "sakoe_chiba"

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "width": self.width}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BandConstraint":
        return cls(data.get("kind", "none"), int(data.get("width", 0)))

    def __str__(self):
        return "none" if not self.active else f"sakoe_chiba({self.width})"


@dataclass
class DtwResult:
    """DTW输出：最优对齐与差异度（对齐上L2距离之和）"""
    alignment: np.ndarray
    discrepancy: float

    def __len__(self):
        return len(self.alignment)


def as_sequence(data, name: str = "sequence") -> np.ndarray:
    """转换为 (τ, m) 的 float64 数组，一维输入视作 m=1"""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DataError(f"{name} 必须是一维或二维数组，实际维数 {arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} 的长度与特征维度必须至少为 1，实际形状 {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} 含有非有限值")
    return arr


def _check_dims(s1: np.ndarray, s2: np.ndarray):
    if s1.shape[1] != s2.shape[1]:
        raise DataError(f"特征维度不一致: m1={s1.shape[1]}, m2={s2.shape[1]}")


def cost_matrix(s1, s2) -> np.ndarray:
    """逐对L2距离矩阵，形状 (τ1, τ2)"""
    s1 = as_sequence(s1, "s1")
    s2 = as_sequence(s2, "s2")
    _check_dims(s1, s2)
    diff = s1[:, None, :] - s2[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def band_mask(n1: int, n2: int, band: BandConstraint) -> np.ndarray:
    """可用格子掩码"""
    if not band.active:
        return np.ones((n1, n2), dtype=np.bool_)
    i = np.arange(1, n1 + 1, dtype=np.float64)[:, None]
    j = np.arange(1, n2 + 1, dtype=np.float64)[None, :]
    # 容差避免 τ2/τ1 的舍入误差把边界格子排除
    return np.abs(i * (n2 / n1) - j) <= band.width + 1e-9


def _band_feasible(n1: int, n2: int, width: int) -> bool:
    """判断归一化带内是否存在连续单调路径"""
    mask = band_mask(n1, n2, BandConstraint.sakoe_chiba(width))
    if not (mask[0, 0] and mask[-1, -1]):
        return False
    prev_hi = None
    for row in mask:
        cols = np.flatnonzero(row)
        if cols.size == 0:
            return False
        lo, hi = cols[0], cols[-1]
        if prev_hi is not None and lo > prev_hi + 1:
            return False
        prev_hi = hi
    return True


def minimum_band_width(n1: int, n2: int) -> int:
    """使归一化带可行的最小整数宽度"""
    for width in range(0, max(n1, n2) + 1):
        if _band_feasible(n1, n2, width):
            return width
    return max(n1, n2)


def _backtrack(step: np.ndarray) -> np.ndarray:
    """从 (τ1, τ2) 回溯到 (1, 1)"""
    i, j = step.shape[0] - 1, step.shape[1] - 1
    path = [(i - 1, j - 1)]
    while i > 1 or j > 1:
        direction = step[i, j]
        if direction == STEP_DIAG:
            i, j = i - 1, j - 1
        elif direction == STEP_UP:
            i -= 1
        else:
            j -= 1
        path.append((i - 1, j - 1))
    path.reverse()
    return np.asarray(path, dtype=np.int64)


def dtw(s1, s2, band: BandConstraint = None) -> DtwResult:
    """精确DTW：最优对齐与差异度"""
    s1 = as_sequence(s1, "s1")
    s2 = as_sequence(s2, "s2")
    _check_dims(s1, s2)
    band = band or BandConstraint.none()

    n1, n2 = s1.shape[0], s2.shape[0]
    local_cost = cost_matrix(s1, s2)
    mask = band_mask(n1, n2, band)
    acc, step = _accumulate(local_cost, mask)

    total = acc[n1, n2]
    if not np.isfinite(total):
        required = minimum_band_width(n1, n2)
        raise NumericError(
            f"带宽 {band.width} 下不存在可行路径 (τ1={n1}, τ2={n2})，所需最小宽度为 {required}"
        )
    return DtwResult(alignment=_backtrack(step), discrepancy=float(total))


def alignment_cost(s1, s2, alignment: np.ndarray) -> float:
    """沿给定对齐重新累加L2距离"""
    s1 = as_sequence(s1, "s1")
    s2 = as_sequence(s2, "s2")
    _check_alignment(alignment, s1.shape[0], s2.shape[0])
    diff = s1[alignment[:, 0]] - s2[alignment[:, 1]]
    return float(np.sum(np.linalg.norm(diff, axis=1)))


def _check_alignment(alignment: np.ndarray, n1: int, n2: int):
    """检查对齐满足边界、单调与连续约束"""
    alignment = np.asarray(alignment)
    if alignment.ndim != 2 or alignment.shape[1] != 2 or len(alignment) == 0:
        raise DataError(f"对齐形状不合法: {alignment.shape}")
    if tuple(alignment[0]) != (0, 0) or tuple(alignment[-1]) != (n1 - 1, n2 - 1):
        raise DataError(
            f"对齐的首尾必须是 (0,0) 与 ({n1 - 1},{n2 - 1})，"
            f"实际为 {tuple(alignment[0])} 与 {tuple(alignment[-1])}"
        )
    steps = np.diff(alignment, axis=0)
    if steps.size and (np.any(steps < 0) or np.any(steps > 1) or np.any(steps.sum(axis=1) == 0)):
        raise DataError("对齐不满足单调性与连续性约束")


def dtw_subgradient(s1, s2, alignment: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """固定对齐下差异度对两条序列的次梯度

    零距离的对齐对贡献零向量。
    """
    s1 = as_sequence(s1, "s1")
    s2 = as_sequence(s2, "s2")
    _check_dims(s1, s2)
    alignment = np.asarray(alignment, dtype=np.int64)
    _check_alignment(alignment, s1.shape[0], s2.shape[0])

    t1, t2 = alignment[:, 0], alignment[:, 1]
    diff = s1[t1] - s2[t2]
    norms = np.linalg.norm(diff, axis=1)
    unit = np.zeros_like(diff)
    nonzero = norms > 0
    unit[nonzero] = diff[nonzero] / norms[nonzero, None]

    g1 = np.zeros_like(s1)
    g2 = np.zeros_like(s2)
    np.add.at(g1, t1, unit)
    np.add.at(g2, t2, -unit)
    return g1, g2


def euclidean(s1, s2) -> float:
    """等长序列的欧氏距离"""
    s1 = as_sequence(s1, "s1")
    s2 = as_sequence(s2, "s2")
    if s1.shape != s2.shape:
        raise DataError(f"欧氏距离要求等长等维，实际形状 {s1.shape} 与 {s2.shape}")
    return float(np.sqrt(np.sum((s1 - s2) ** 2)))
