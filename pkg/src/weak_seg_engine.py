#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
弱监督分割引擎
参考转录集、负转录采样、铰链损失训练、转录检索、基于对齐的帧标注与动作摘要
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import SegConfig
from .dtw_core import DtwResult, dtw, dtw_subgradient, as_sequence
from .encoder import Encoder, encode, encoder_backward
from .errors import DataError, NumericError
from .logger_config import format_record, get_logger
from .model import Model
from .prototype_store import (
    OrderingSequence, PrototypeSet, check_transcript, init_seg_prototypes, position_to_action, temp_cat,
)
from .training_toolkit import AdamState, BatchSpec, adam_step, minibatch_iter, stream_rng

logger = get_logger(__name__)

# 训练过程中评估损失时使用的固定随机流键，保证各次评估的负样本一致
EVAL_STREAM = 0x5EED


def collapse_repeats(labels: Sequence[int], skip: Optional[int] = None) -> List[int]:
    """合并相邻重复的标签，可跳过背景类"""
    out: List[int] = []
    for label in labels:
        label = int(label)
        if skip is not None and label == skip:
            continue
        if not out or out[-1] != label:
            out.append(label)
    return out


@dataclass
class SegSample:
    """一个视频：原始帧特征、正转录与可选的逐帧真实标签（仅用于评估）"""
    id: str
    frames: np.ndarray
    transcript: List[int]
    gt_labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.frames = as_sequence(self.frames, f"样本 {self.id} 的 frames")
        self.transcript = check_transcript(self.transcript)
        if self.gt_labels is not None:
            self.gt_labels = np.asarray(self.gt_labels, dtype=np.int64)
            if self.gt_labels.shape != (self.frames.shape[0],):
                raise DataError(
                    f"样本 {self.id} 的标签长度 {self.gt_labels.size} 与帧数 {self.frames.shape[0]} 不一致"
                )

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def check_consistency(self, background_id: Optional[int] = None):
        """真实标签合并重复后应与转录的动作顺序一致（背景帧除外）"""
        if self.gt_labels is None:
            return
        if collapse_repeats(self.gt_labels, background_id) != collapse_repeats(self.transcript, background_id):
            raise DataError(f"样本 {self.id} 的逐帧标签与转录顺序不一致")


class ReferenceSet:
    """训练集中去重后的转录集合，保持首次出现的顺序"""

    def __init__(self, transcripts: Sequence[Sequence[int]] = ()):
        self._items: List[Tuple[int, ...]] = []
        self._seen = set()
        for transcript in transcripts:
            self.add(transcript)

    def add(self, transcript: Sequence[int]) -> bool:
        key = tuple(check_transcript(transcript))
        if key in self._seen:
            return False
        self._seen.add(key)
        self._items.append(key)
        return True

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[List[int]]:
        return (list(t) for t in self._items)

    def __contains__(self, transcript) -> bool:
        return tuple(int(o) for o in transcript) in self._seen

    def __getitem__(self, index: int) -> List[int]:
        return list(self._items[index])

    def to_list(self) -> List[List[int]]:
        return [list(t) for t in self._items]


def build_reference_set(samples: Sequence[SegSample]) -> ReferenceSet:
    """汇总训练集全部正转录并去重"""
    if not samples:
        raise DataError("训练集为空，无法构建参考转录集")
    reference = ReferenceSet(s.transcript for s in samples)
    logger.info(f"📋 参考转录集: {len(reference)} 个不同的转录（来自 {len(samples)} 个样本）")
    return reference


def sample_negatives(reference: ReferenceSet, positive: Sequence[int], q: int,
                     rng: np.random.Generator) -> List[List[int]]:
    """从 ℛ \\ {𝒪⁺} 中无放回均匀抽取 min(Q, 可用数) 个负转录"""
    positive = tuple(int(o) for o in positive)
    candidates = [t for t in reference if tuple(t) != positive]
    if not candidates:
        return []
    chosen = rng.choice(len(candidates), size=min(q, len(candidates)), replace=False)
    return [candidates[i] for i in chosen]


@dataclass
class SegLoss:
    """单样本的 ℒ_w_seg、各分项与梯度"""
    total: float
    hinge: float
    dist: float
    d_pos: float
    d_neg: List[float]
    grads: Dict[str, np.ndarray] = field(default_factory=dict)


def _route_prototype_grad(grad: np.ndarray, ordering: OrderingSequence, g_ordering: np.ndarray,
                          weight: float):
    """把拼接序列上的梯度按段累加回各原型"""
    blocks = g_ordering.reshape(len(ordering.transcript), ordering.tau_p, -1)
    np.add.at(grad, np.asarray(ordering.transcript) - 1, weight * blocks)


def seg_loss(X, positive: Sequence[int], negatives: Sequence[Sequence[int]],
             protoset: PrototypeSet, enc: Encoder, cfg: SegConfig) -> SegLoss:
    """ℒ_w_seg = Σ_q max(0, d̂⁺ − d̂⁻ᑫ + δ) + λ·d̂⁺

    没有负转录时只剩 λ·d̂⁺ 一项。
    """
    X = as_sequence(X, "X")
    s = encode(X, enc)
    if s.shape[1] != protoset.m:
        raise DataError(f"编码特征维度 {s.shape[1]} 与原型维度 {protoset.m} 不一致")

    pos_seq = temp_cat(positive, protoset)
    pos_res = dtw(pos_seq.data, s)
    neg_seqs = [temp_cat(n, protoset) for n in negatives]
    neg_res = [dtw(n.data, s) for n in neg_seqs]

    d_pos = pos_res.discrepancy
    d_neg = [r.discrepancy for r in neg_res]
    margins = [d_pos - d + cfg.delta for d in d_neg]
    active = [m > 0 for m in margins]
    hinge = float(sum(m for m, a in zip(margins, active) if a))
    total = hinge + cfg.lam * d_pos

    grad_protos = np.zeros_like(protoset.data)
    grad_s = np.zeros_like(s)
    terms = [(pos_seq, pos_res, sum(active) + cfg.lam)]
    terms += [(n, r, -1.0) for n, r, a in zip(neg_seqs, neg_res, active) if a]
    for ordering, result, weight in terms:
        if weight == 0:
            continue
        g_ordering, g_s = dtw_subgradient(ordering.data, s, result.alignment)
        _route_prototype_grad(grad_protos, ordering, g_ordering, weight)
        grad_s += weight * g_s

    grads = {"prototypes": grad_protos}
    grads.update(encoder_backward(X, enc, grad_s))
    return SegLoss(total, hinge, d_pos, d_pos, d_neg, grads)


def _split_params(params: Dict[str, np.ndarray], enc: Encoder) -> Tuple[PrototypeSet, Encoder]:
    return PrototypeSet(params["prototypes"]), enc.with_params(params)


def evaluate_seg_loss(samples: Sequence[SegSample], reference: ReferenceSet, protoset: PrototypeSet,
                      enc: Encoder, cfg: SegConfig) -> Dict[str, float]:
    """全训练集的平均损失，负转录取自固定随机流"""
    totals = np.zeros(3)
    for idx, sample in enumerate(samples):
        negatives = sample_negatives(reference, sample.transcript, cfg.q,
                                     stream_rng(cfg.seed, EVAL_STREAM, idx))
        result = seg_loss(sample.frames, sample.transcript, negatives, protoset, enc, cfg)
        totals += (result.total, result.hinge, result.dist)
    totals /= len(samples)
    return {"loss": float(totals[0]), "hinge": float(totals[1]), "dist": float(totals[2])}


def train_seg(samples: Sequence[SegSample], cfg: SegConfig, num_classes: int = None,
              vocabulary: List[str] = None) -> Model:
    """联合优化原型与编码器参数（Adam，批内平均 ℒ_w_seg）

    负转录的随机流按 (seed, step, 样本下标) 派生。
    """
    cfg.validate()
    if not samples:
        raise DataError("训练集为空")
    num_classes = num_classes or max(max(s.transcript) for s in samples)
    vocabulary = vocabulary or [str(k) for k in range(1, num_classes + 1)]
    if len(vocabulary) != num_classes:
        raise DataError(f"词表大小 {len(vocabulary)} 与类别数 {num_classes} 不一致")

    m_in = samples[0].frames.shape[1]
    if any(s.frames.shape[1] != m_in for s in samples):
        raise DataError("训练样本的特征维度不一致")
    enc = Encoder.create(cfg.encoder, m_in, rng=stream_rng(cfg.seed, 1))
    reference = build_reference_set(samples)
    protoset = init_seg_prototypes([encode(s.frames, enc) for s in samples],
                                   [s.transcript for s in samples],
                                   cfg.tau_p, num_classes, cfg.init_max_members)

    logger.info(f"🚀 开始分割训练: N={len(samples)} K={num_classes} τ_p={cfg.tau_p} "
                f"encoder={enc.spec} δ={cfg.delta} λ={cfg.lam} Q={cfg.q} steps={cfg.steps}")

    params = {"prototypes": protoset.data.copy(), **{k: v.copy() for k, v in enc.params().items()}}
    state = AdamState.create(params, cfg.learning_rate)
    spec = BatchSpec.count(cfg.batch_size, cfg.seed)

    history = [dict(step=0, **evaluate_seg_loss(samples, reference, protoset, enc, cfg))]
    _log_step(history[-1])

    epoch, queue = 0, []
    skipped = 0
    for step in range(1, cfg.steps + 1):
        if not queue:
            epoch += 1
            queue = minibatch_iter(len(samples), spec, epoch)
        batch = queue.pop(0)

        cur_protos, cur_enc = _split_params(params, enc)
        grads = {name: np.zeros_like(value) for name, value in params.items()}
        batch_total = 0.0
        for idx in batch:
            sample = samples[int(idx)]
            negatives = sample_negatives(reference, sample.transcript, cfg.q,
                                         stream_rng(cfg.seed, step, int(idx)))
            if not negatives:
                skipped += 1
            result = seg_loss(sample.frames, sample.transcript, negatives, cur_protos, cur_enc, cfg)
            batch_total += result.total
            for name, g in result.grads.items():
                grads[name] += g
        batch_total /= len(batch)
        if not math.isfinite(batch_total):
            raise NumericError(f"第 {step} 步出现非有限损失: {batch_total}")
        grads = {name: g / len(batch) for name, g in grads.items()}
        params, state = adam_step(params, grads, state)

        if step % cfg.eval_every == 0 or step == cfg.steps:
            cur_protos, cur_enc = _split_params(params, enc)
            history.append(dict(step=step, **evaluate_seg_loss(samples, reference, cur_protos, cur_enc, cfg)))
            _log_step(history[-1])

    if skipped:
        logger.warning(f"⚠️  {skipped} 个样本次没有可用负转录，仅计入距离项")

    final_protos, final_enc = _split_params(params, enc)
    return Model(
        mode="segmentation",
        vocabulary=list(vocabulary),
        prototypes=final_protos,
        encoder=final_enc,
        config=cfg.to_dict(),
        reference_set=reference.to_list(),
        history=history,
    )


def _log_step(record: Dict[str, float]):
    logger.info(format_record(record, "step"))


@dataclass
class Retrieval:
    """检索结果：最佳转录、差异度与其在参考集中的位置"""
    transcript: List[int]
    discrepancy: float
    index: int


def retrieve_transcript(s, reference: ReferenceSet, protoset: PrototypeSet) -> Retrieval:
    """在参考集中穷举检索差异度最小的转录，平局取最早加入者"""
    if len(reference) == 0:
        raise DataError("参考转录集为空")
    s = as_sequence(s)
    best: Optional[Retrieval] = None
    for index, transcript in enumerate(reference):
        d = dtw(temp_cat(transcript, protoset).data, s).discrepancy
        if best is None or d < best.discrepancy:
            best = Retrieval(transcript, d, index)
    return best


def _align(s, transcript: Sequence[int], protoset: PrototypeSet) -> Tuple[OrderingSequence, np.ndarray, DtwResult, np.ndarray]:
    s = as_sequence(s)
    if s.shape[1] != protoset.m:
        raise DataError(f"序列特征维度 {s.shape[1]} 与原型维度 {protoset.m} 不一致")
    ordering = temp_cat(transcript, protoset)
    result = dtw(ordering.data, s)
    t1, t2 = result.alignment[:, 0], result.alignment[:, 1]
    dist = np.linalg.norm(ordering.data[t1] - s[t2], axis=1)
    return ordering, s, result, dist


def frame_positions(s, transcript: Sequence[int], protoset: PrototypeSet) -> np.ndarray:
    """每帧在拼接序列中的最近邻位置 t1*（平局取较小的 t1）"""
    _, s, result, dist = _align(s, transcript, protoset)
    t1, t2 = result.alignment[:, 0], result.alignment[:, 1]
    order = np.lexsort((t1, dist, t2))
    _, first = np.unique(t2[order], return_index=True)
    return t1[order][first]


def label_frames(s, transcript: Sequence[int], protoset: PrototypeSet) -> np.ndarray:
    """基于对齐的逐帧标注，每帧取最近邻原型位置的动作"""
    entries = check_transcript(transcript, protoset.num_classes)
    positions = frame_positions(s, entries, protoset)
    return position_to_action(positions, entries, protoset.tau_p)


@dataclass
class Summary:
    """动作摘要：Γ 个关键帧索引及其预期动作"""
    key_indices: np.ndarray
    actions: np.ndarray


def summarize(s, positive: Sequence[int], protoset: PrototypeSet) -> Summary:
    """拼接序列的每个位置在其对齐的帧中取最近邻帧（平局取较小的 t′）"""
    entries = check_transcript(positive, protoset.num_classes)
    _, _, result, dist = _align(s, entries, protoset)
    t1, t2 = result.alignment[:, 0], result.alignment[:, 1]
    order = np.lexsort((t2, dist, t1))
    _, first = np.unique(t1[order], return_index=True)
    keys = t2[order][first]
    actions = position_to_action(t1[order][first], entries, protoset.tau_p)
    return Summary(key_indices=keys, actions=actions)


def infer_labels(model: Model, sample: SegSample, setting: str = "segmentation") -> Tuple[np.ndarray, List[int]]:
    """推理逐帧标签

    segmentation 设置先从参考集检索转录；alignment 设置直接使用样本的正转录。
    """
    s = encode(sample.frames, model.encoder)
    if setting == "alignment":
        transcript = sample.transcript
    elif setting == "segmentation":
        transcript = retrieve_transcript(s, ReferenceSet(model.reference_set), model.prototypes).transcript
    else:
        raise DataError(f"未知的推理设置: {setting}（可选 segmentation、alignment）")
    return label_frames(s, transcript, model.prototypes), transcript
