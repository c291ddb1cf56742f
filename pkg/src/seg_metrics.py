#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
分割评估指标
帧精度 F-acc、IoU、IoD，以及动作摘要的匹配率
"""

from dataclasses import dataclass, asdict, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DataError


@dataclass
class SegMetrics:
    """F-acc / IoU / IoD，均在 [0, 1] 内"""
    f_acc: float
    iou: float
    iod: float
    frames: int = 0
    pairs: int = 0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class _VideoScores:
    correct: int
    frames: int
    iou: List[float] = field(default_factory=list)
    iod: List[float] = field(default_factory=list)


def _video_scores(pred, gt, background_id: Optional[int], exclude_background: bool) -> _VideoScores:
    pred = np.asarray(pred, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise DataError(f"预测长度 {pred.shape} 与真实标签长度 {gt.shape} 不一致")

    scores = _VideoScores(correct=int(np.sum(pred == gt)), frames=int(gt.size))
    for k in np.unique(gt):
        if exclude_background and background_id is not None and k == background_id:
            continue
        predicted = pred == k
        truth = gt == k
        inter = int(np.sum(predicted & truth))
        union = int(np.sum(predicted | truth))
        detected = int(np.sum(predicted))
        scores.iou.append(inter / union if union else 0.0)
        scores.iod.append(inter / detected if detected else 0.0)
    return scores


def evaluate(pred, gt, background_id: Optional[int] = None,
             exclude_background: bool = True) -> SegMetrics:
    """单个视频的评估：F-acc 覆盖全部帧，IoU/IoD 对真实标签中出现的非背景类别取平均"""
    return aggregate_metrics([pred], [gt], background_id, exclude_background)


def aggregate_metrics(preds: Sequence, gts: Sequence, background_id: Optional[int] = None,
                      exclude_background: bool = True) -> SegMetrics:
    """语料级评估：F-acc 汇总全部帧，IoU/IoD 对全部 (视频, 类别) 对取平均"""
    if len(preds) != len(gts):
        raise DataError(f"预测视频数 {len(preds)} 与真实视频数 {len(gts)} 不一致")
    correct = frames = 0
    ious: List[float] = []
    iods: List[float] = []
    for pred, gt in zip(preds, gts):
        scores = _video_scores(pred, gt, background_id, exclude_background)
        correct += scores.correct
        frames += scores.frames
        ious.extend(scores.iou)
        iods.extend(scores.iod)
    return SegMetrics(
        f_acc=correct / frames if frames else 0.0,
        iou=float(np.mean(ious)) if ious else 0.0,
        iod=float(np.mean(iods)) if iods else 0.0,
        frames=frames,
        pairs=len(ious),
    )


def summary_accuracy(key_indices, gt, transcript: Sequence[int], tau_p: int) -> float:
    """关键帧的真实标签与所在块的预期动作一致的比例

    第 i 块（τ_p 个关键帧）的预期动作为 transcript[i]。
    """
    key_indices = np.asarray(key_indices, dtype=np.int64)
    gt = np.asarray(gt, dtype=np.int64)
    gamma = len(transcript) * tau_p
    if key_indices.shape != (gamma,):
        raise DataError(f"关键帧数 {key_indices.size} 与 Γ={gamma} 不一致")
    if key_indices.size and (key_indices.min() < 0 or key_indices.max() >= gt.size):
        raise DataError(f"关键帧索引越界 (0..{gt.size - 1})")
    intended = np.repeat(np.asarray(transcript, dtype=np.int64), tau_p)
    return float(np.mean(gt[key_indices] == intended))


def uniform_summary(tau: int, gamma: int) -> np.ndarray:
    """均匀采样 Γ 个关键帧：floor((t + 0.5)·τ/Γ)"""
    if tau < 1 or gamma < 1:
        raise DataError(f"τ 与 Γ 必须至少为 1: τ={tau}, Γ={gamma}")
    t = np.arange(gamma)
    return np.floor((t + 0.5) * tau / gamma).astype(np.int64)
