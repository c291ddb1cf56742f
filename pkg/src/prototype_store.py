#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
原型存储模块
类别原型集合的创建与组合：medoid初始化、按转录拼接（TempCat）、DBA平均基线
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .config import config
from .dtw_core import dtw, as_sequence
from .errors import DataError
from .logger_config import get_logger

logger = get_logger(__name__)


@dataclass
class PrototypeSet:
    """K个共享 (τ_p, m) 的原型，类别 id 为 1..K，存为 (K, τ_p, m) 数组"""
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape) < 1:
            raise DataError(f"原型集合必须是 (K, τ_p, m) 数组，实际形状 {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DataError("原型含有非有限值")

    @property
    def num_classes(self) -> int:
        return self.data.shape[0]

    @property
    def tau_p(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return self.data.shape[2]

    def prototype(self, class_id: int) -> np.ndarray:
        """取类别 class_id（1 基）的原型"""
        self._check_class(class_id)
        return self.data[class_id - 1]

    def _check_class(self, class_id: int):
        if not 1 <= int(class_id) <= self.num_classes:
            raise DataError(f"未知的类别 id {class_id}，合法范围 1..{self.num_classes}")

    def copy(self) -> "PrototypeSet":
        return PrototypeSet(self.data.copy())


@dataclass
class OrderingSequence:
    """按转录拼接出的序列，长度 Γ = l·τ_p"""
    data: np.ndarray
    transcript: List[int]
    tau_p: int

    @property
    def length(self) -> int:
        return self.data.shape[0]


def check_transcript(transcript: Sequence[int], num_classes: int = None) -> List[int]:
    """校验转录非空且类别 id 合法"""
    entries = [int(o) for o in transcript]
    if not entries:
        raise DataError("转录不能为空")
    for o in entries:
        if o < 1 or (num_classes is not None and o > num_classes):
            raise DataError(f"转录中的类别 id {o} 越界 (1..{num_classes})")
    return entries


def resample(seq, length: int) -> np.ndarray:
    """沿时间轴线性插值重采样到指定长度"""
    seq = as_sequence(seq)
    if length < 1:
        raise DataError(f"重采样长度必须至少为 1: {length}")
    n = seq.shape[0]
    if n == length:
        return seq.copy()
    if n == 1:
        return np.repeat(seq, length, axis=0)
    src = np.linspace(0.0, n - 1, length)
    grid = np.arange(n)
    return np.stack([np.interp(src, grid, seq[:, d]) for d in range(seq.shape[1])], axis=1)


def medoid_index(members: List[np.ndarray]) -> int:
    """DTW差异度总和最小的成员下标，平局取最靠前者"""
    n = len(members)
    totals = np.zeros(n)
    for a in range(n):
        for b in range(a + 1, n):
            d = dtw(members[a], members[b]).discrepancy
            totals[a] += d
            totals[b] += d
    return int(np.argmin(totals))


def init_medoid_prototypes(sequences: List[np.ndarray], labels: Sequence[int],
                           tau_p: int, num_classes: int) -> PrototypeSet:
    """每个类别取DTW medoid作为初始原型，长度不等时重采样到 τ_p"""
    labels = [int(y) for y in labels]
    if len(sequences) != len(labels):
        raise DataError(f"序列数 {len(sequences)} 与标签数 {len(labels)} 不一致")

    protos = []
    for k in range(1, num_classes + 1):
        members = [as_sequence(s) for s, y in zip(sequences, labels) if y == k]
        if not members:
            raise DataError(f"类别 {k} 没有训练样本，无法初始化原型")
        best = medoid_index(members)
        protos.append(resample(members[best], tau_p))
        logger.debug(f"类别 {k}: {len(members)} 个成员，medoid 下标 {best}")

    dims = {p.shape[1] for p in protos}
    if len(dims) != 1:
        raise DataError(f"各类别的特征维度不一致: {sorted(dims)}")
    return PrototypeSet(np.stack(protos))


def temp_cat(transcript: Sequence[int], protoset: PrototypeSet) -> OrderingSequence:
    """按转录顺序拼接原型"""
    entries = check_transcript(transcript, protoset.num_classes)
    data = np.concatenate([protoset.data[o - 1] for o in entries], axis=0)
    return OrderingSequence(data=data, transcript=entries, tau_p=protoset.tau_p)


def position_to_action(t, transcript: Sequence[int], tau_p: int):
    """拼接序列中第 t 个位置（0 基）所属的类别

    t 为整数时返回 int，为数组时逐元素返回类别数组。
    """
    positions = np.asarray(t, dtype=np.int64)
    length = len(transcript) * tau_p
    outside = (positions < 0) | (positions >= length)
    if np.any(outside):
        raise DataError(f"位置 {positions[outside].ravel()[0]} 越界 (0..{length - 1})")
    actions = np.asarray(transcript, dtype=np.int64)[positions // tau_p]
    return int(actions) if actions.ndim == 0 else actions


def dba(sequences: List[np.ndarray], init, max_iters: int = None, tol: float = None) -> np.ndarray:
    """DTW重心平均

    每轮把所有序列对齐到当前重心，再把重心每个时间步设为对齐到它的点的均值；
    达到 max_iters 或重心最大绝对变化小于 tol 时停止。
    """
    center, _ = dba_trace(sequences, init, max_iters, tol)
    return center


def dba_trace(sequences: List[np.ndarray], init, max_iters: int = None,
              tol: float = None) -> Tuple[np.ndarray, List[float]]:
    """DBA迭代，同时返回每个被接受的重心对应的目标值（差异度之和）

    均值更新不一定降低L2距离之和，使目标上升的重心会被丢弃并停止迭代，
    因此返回的目标序列非增。
    """
    if not sequences:
        raise DataError("DBA 需要至少一条序列")
    max_iters = config.dba_max_iters if max_iters is None else max_iters
    tol = config.dba_tol if tol is None else tol

    members = [as_sequence(s) for s in sequences]
    center = as_sequence(init, "init").copy()
    if any(s.shape[1] != center.shape[1] for s in members):
        raise DataError("DBA 的初始重心与序列特征维度不一致")

    objectives: List[float] = []
    candidate = center
    for iteration in range(max_iters + 1):
        results = [dtw(candidate, seq) for seq in members]
        objective = float(sum(r.discrepancy for r in results))
        if objectives and objective > objectives[-1]:
            logger.debug(f"DBA 第 {iteration} 轮目标上升 ({objective:.6g} > {objectives[-1]:.6g})，停止")
            break
        center = candidate
        objectives.append(objective)
        if iteration == max_iters:
            break

        sums = np.zeros_like(center)
        counts = np.zeros(center.shape[0])
        for seq, result in zip(members, results):
            alignment = result.alignment
            np.add.at(sums, alignment[:, 0], seq[alignment[:, 1]])
            np.add.at(counts, alignment[:, 0], 1)
        candidate = sums / counts[:, None]
        change = float(np.max(np.abs(candidate - center)))
        logger.debug(f"DBA 第 {iteration + 1} 轮，重心变化 {change:.3e}")
        if change < tol:
            break
    return center, objectives


def dba_objective(sequences: List[np.ndarray], center) -> float:
    """重心到所有序列的DTW差异度之和"""
    return float(sum(dtw(center, s).discrepancy for s in sequences))


def init_dba_prototypes(sequences: List[np.ndarray], labels: Sequence[int],
                        tau_p: int, num_classes: int) -> PrototypeSet:
    """从medoid出发，对每个类别运行DBA得到原型"""
    medoids = init_medoid_prototypes(sequences, labels, tau_p, num_classes)
    labels = [int(y) for y in labels]
    protos = []
    for k in range(1, num_classes + 1):
        members = [s for s, y in zip(sequences, labels) if y == k]
        protos.append(dba(members, medoids.prototype(k)))
    return PrototypeSet(np.stack(protos))


def uniform_segments(tau: int, transcript: Sequence[int]) -> List[np.ndarray]:
    """按转录长度把 τ 帧均匀切成 l 段（帧数不足时末尾段可能为空）"""
    return np.array_split(np.arange(tau), len(transcript))


def init_seg_prototypes(sequences: List[np.ndarray], transcripts: List[Sequence[int]],
                        tau_p: int, num_classes: int, max_members: int = 40) -> PrototypeSet:
    """分割模式的原型初始化

    每条（已编码的）序列按其转录均匀切段，每段重采样到 τ_p 后作为对应类别的成员，
    每类最多取前 max_members 个成员，再取DTW medoid。
    """
    members: Dict[int, List[np.ndarray]] = {k: [] for k in range(1, num_classes + 1)}
    for seq, transcript in zip(sequences, transcripts):
        seq = as_sequence(seq)
        entries = check_transcript(transcript, num_classes)
        for o, frames in zip(entries, uniform_segments(seq.shape[0], entries)):
            if frames.size and len(members[o]) < max_members:
                members[o].append(resample(seq[frames], tau_p))

    protos = []
    for k in range(1, num_classes + 1):
        if not members[k]:
            raise DataError(f"类别 {k} 未出现在任何训练转录中，无法初始化原型")
        protos.append(members[k][medoid_index(members[k])])
    logger.info(f"✅ 分割原型初始化完成: K={num_classes} τ_p={tau_p}")
    return PrototypeSet(np.stack(protos))
