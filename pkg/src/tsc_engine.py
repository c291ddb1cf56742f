#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
时间序列分类引擎
逐类差异度、判别式损失、训练循环、1-NN推理、基线方法与比较报告
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import TscConfig, config
from .dtw_core import BandConstraint, dtw, dtw_subgradient, euclidean, as_sequence
from .encoder import Encoder
from .errors import DataError, NumericError
from .logger_config import format_record, get_logger
from .model import Model
from .prototype_store import PrototypeSet, init_medoid_prototypes, init_dba_prototypes
from .training_toolkit import AdamState, BatchSpec, adam_step, minibatch_iter, stream_rng

logger = get_logger(__name__)

BASELINE_METHODS = ("ed", "dtw", "dtww", "dba")


@dataclass
class TscDataset:
    """带标签的序列集合，标签为 1..K"""
    sequences: List[np.ndarray]
    labels: np.ndarray
    vocabulary: List[str]
    split: str = "train"
    name: str = ""

    def __post_init__(self):
        self.sequences = [as_sequence(s, f"{self.split}[{i}]") for i, s in enumerate(self.sequences)]
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.sequences) != len(self.labels):
            raise DataError(f"序列数 {len(self.sequences)} 与标签数 {len(self.labels)} 不一致")
        if len(self.labels) and (self.labels.min() < 1 or self.labels.max() > len(self.vocabulary)):
            raise DataError(f"标签超出 1..{len(self.vocabulary)} 的范围")

    def __len__(self):
        return len(self.sequences)

    @property
    def num_classes(self) -> int:
        return len(self.vocabulary)

    @property
    def max_length(self) -> int:
        return max(s.shape[0] for s in self.sequences)

    @property
    def m(self) -> int:
        return self.sequences[0].shape[1]

    def subset(self, indices: Sequence[int], split: str = None) -> "TscDataset":
        idx = [int(i) for i in indices]
        return TscDataset([self.sequences[i] for i in idx], self.labels[idx],
                          self.vocabulary, split or self.split, self.name)


@dataclass
class ClassScores:
    """一条序列对各类原型的差异度、softmax概率与对齐"""
    discrepancies: np.ndarray
    logits: np.ndarray
    alignments: List[np.ndarray] = field(default_factory=list)


@dataclass
class TscLoss:
    """单样本损失及对全部原型的梯度"""
    total: float
    ce: float
    dist: float
    grad: np.ndarray
    scores: ClassScores


def softmax_neg(d: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """对负差异度做softmax，带最大值平移"""
    if temperature <= 0:
        raise DataError(f"temperature 必须为正: {temperature}")
    z = -np.asarray(d, dtype=np.float64) / temperature
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def _log_softmax_neg(d: np.ndarray, temperature: float) -> np.ndarray:
    z = -np.asarray(d, dtype=np.float64) / temperature
    shift = np.max(z)
    return z - (shift + np.log(np.sum(np.exp(z - shift))))


def class_discrepancies(s, protoset: PrototypeSet, band: BandConstraint = None,
                        temperature: float = 1.0) -> ClassScores:
    """序列与每个类别原型的DTW差异度"""
    s = as_sequence(s)
    if s.shape[1] != protoset.m:
        raise DataError(f"序列特征维度 {s.shape[1]} 与原型维度 {protoset.m} 不一致")
    results = [dtw(protoset.data[k], s, band) for k in range(protoset.num_classes)]
    d = np.array([r.discrepancy for r in results])
    return ClassScores(d, softmax_neg(d, temperature), [r.alignment for r in results])


def tsc_loss(s, y: int, protoset: PrototypeSet, cfg: TscConfig) -> TscLoss:
    """ℒ = −log σ_y + λ·d̂_y，以及固定对齐下对每个原型的次梯度"""
    if not 1 <= int(y) <= protoset.num_classes:
        raise DataError(f"标签 {y} 超出 1..{protoset.num_classes}")
    s = as_sequence(s)
    scores = class_discrepancies(s, protoset, cfg.band, cfg.temperature)
    k_true = int(y) - 1

    log_sigma = _log_softmax_neg(scores.discrepancies, cfg.temperature)
    ce = float(-log_sigma[k_true])
    dist = float(scores.discrepancies[k_true])
    total = ce + cfg.lam * dist

    # dℒ/dd̂_k = (1[k=y] − σ_k)/T + λ·1[k=y]
    coef = -scores.logits / cfg.temperature
    coef[k_true] += 1.0 / cfg.temperature + cfg.lam

    grad = np.zeros_like(protoset.data)
    for k, alignment in enumerate(scores.alignments):
        if coef[k] == 0.0:
            continue
        g_proto, _ = dtw_subgradient(protoset.data[k], s, alignment)
        grad[k] = coef[k] * g_proto
    return TscLoss(total, ce, dist, grad, scores)


def batch_loss(protoset: PrototypeSet, dataset: TscDataset, indices: Sequence[int],
               cfg: TscConfig):
    """批内平均损失与梯度，按下标顺序累加"""
    grad = np.zeros_like(protoset.data)
    totals = np.zeros(3)
    for i in indices:
        result = tsc_loss(dataset.sequences[i], dataset.labels[i], protoset, cfg)
        grad += result.grad
        totals += (result.total, result.ce, result.dist)
    n = len(indices)
    return totals / n, grad / n


def evaluate_loss(dataset: TscDataset, protoset: PrototypeSet, cfg: TscConfig) -> Dict[str, float]:
    """全数据集的平均损失"""
    (total, ce, dist), _ = batch_loss(protoset, dataset, range(len(dataset)), cfg)
    return {"loss": float(total), "ce": float(ce), "dist": float(dist)}


def train_tsc(train: TscDataset, cfg: TscConfig, init: PrototypeSet = None) -> Model:
    """DP-DTW训练：medoid初始化 + Adam mini-batch下降"""
    cfg.validate()
    if len(train) == 0:
        raise DataError("训练集为空")

    tau_p = train.max_length
    protoset = init.copy() if init is not None else init_medoid_prototypes(
        train.sequences, train.labels, tau_p, train.num_classes)
    logger.info(f"🚀 开始TSC训练: N={len(train)} K={train.num_classes} τ_p={tau_p} "
                f"λ={cfg.lam} lr={cfg.learning_rate} epochs={cfg.epochs}")

    params = {"prototypes": protoset.data.copy()}
    state = AdamState.create(params, cfg.learning_rate)
    spec = BatchSpec.fraction(cfg.batch_fraction, cfg.seed)

    history = [dict(epoch=0, **evaluate_loss(train, protoset, cfg))]
    _log_epoch(history[-1])

    for epoch in range(1, cfg.epochs + 1):
        for batch in minibatch_iter(len(train), spec, epoch):
            (total, _, _), grad = batch_loss(PrototypeSet(params["prototypes"]), train, batch, cfg)
            if not math.isfinite(total):
                raise NumericError(f"第 {epoch} 个epoch出现非有限损失: {total}")
            params, state = adam_step(params, {"prototypes": grad}, state)
        history.append(dict(epoch=epoch, **evaluate_loss(train, PrototypeSet(params["prototypes"]), cfg)))
        _log_epoch(history[-1])

    final = PrototypeSet(params["prototypes"])
    return Model(
        mode="tsc",
        vocabulary=list(train.vocabulary),
        prototypes=final,
        encoder=Encoder.create("identity", final.m),
        config=cfg.to_dict(),
        history=history,
    )


def _log_epoch(record: Dict[str, float]):
    logger.info(format_record(record, "epoch"))


def stratified_holdout(labels: np.ndarray, fraction: float, seed: int):
    """分层留出：每类至少保留一个训练样本"""
    rng = stream_rng(seed, 7919)
    fit_idx, hold_idx = [], []
    for k in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == k))
        n_hold = min(len(members) - 1, int(math.floor(fraction * len(members))))
        hold_idx.extend(members[:n_hold].tolist())
        fit_idx.extend(members[n_hold:].tolist())
    return sorted(fit_idx), sorted(hold_idx)


def select_learning_rate(train: TscDataset, cfg: TscConfig, grid: Sequence[float] = None,
                         holdout: float = None) -> float:
    """在训练集留出部分上交叉验证学习率，平局取较小者"""
    grid = sorted(grid or config.lr_grid)
    holdout = config.lr_holdout_fraction if holdout is None else holdout
    fit_idx, hold_idx = stratified_holdout(train.labels, holdout, cfg.seed)
    if not hold_idx:
        logger.warning(f"⚠️  训练集太小，无法留出验证集，沿用学习率 {cfg.learning_rate}")
        return cfg.learning_rate

    fit, hold = train.subset(fit_idx, "fit"), train.subset(hold_idx, "holdout")
    init = init_medoid_prototypes(fit.sequences, fit.labels, train.max_length, train.num_classes)
    best_lr, best_acc = grid[0], -1.0
    for lr in grid:
        model = train_tsc(fit, replace(cfg, learning_rate=lr), init=init)
        acc = accuracy(predict_all(hold, model.prototypes, cfg.band), hold.labels)
        logger.info(f"📊 学习率 {lr:g}: 留出精度 {acc:.4f}")
        if acc > best_acc:
            best_lr, best_acc = lr, acc
    logger.info(f"✅ 选定学习率 {best_lr:g}（留出精度 {best_acc:.4f}）")
    return best_lr


def predict(s, protoset: PrototypeSet, band: BandConstraint = None) -> int:
    """1-NN原型分类，平局取较小的类别 id"""
    scores = class_discrepancies(s, protoset, band)
    return int(np.argmin(scores.discrepancies)) + 1


def predict_all(dataset: TscDataset, protoset: PrototypeSet, band: BandConstraint = None) -> np.ndarray:
    return np.array([predict(s, protoset, band) for s in dataset.sequences], dtype=np.int64)


def accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    pred, labels = np.asarray(pred), np.asarray(labels)
    if pred.shape != labels.shape:
        raise DataError(f"预测数 {pred.shape} 与标签数 {labels.shape} 不一致")
    return float(np.mean(pred == labels)) if len(labels) else 0.0


def _distance_fn(metric: str, band: BandConstraint = None):
    if metric == "ed":
        return euclidean
    if metric in ("dtw", "dtww"):
        return lambda a, b: dtw(a, b, band).discrepancy
    raise DataError(f"未知的距离度量: {metric}")


def pairwise_distances(queries: List[np.ndarray], refs: List[np.ndarray], metric: str,
                       band: BandConstraint = None) -> np.ndarray:
    """查询集合到参考集合的距离矩阵"""
    dist = _distance_fn(metric, band)
    return np.array([[dist(q, r) for r in refs] for q in queries])


def window_grid(length: int) -> List[int]:
    """窗口搜索网格 {0..⌈0.1·τ⌉}"""
    return list(range(0, int(math.ceil(config.window_fraction * length)) + 1))


def select_window(train: TscDataset, grid: Sequence[int] = None) -> int:
    """在训练集上留一法选择DTW窗口，平局取较小窗口"""
    if len(train) < 2:
        return 0
    grid = list(grid) if grid is not None else window_grid(train.max_length)
    best_w, best_acc = grid[0], -1.0
    for w in grid:
        try:
            dist = pairwise_distances(train.sequences, train.sequences, "dtww", BandConstraint.sakoe_chiba(w))
        except NumericError:
            logger.debug(f"窗口 {w} 不可行，跳过")
            continue
        np.fill_diagonal(dist, np.inf)
        acc = accuracy(train.labels[np.argmin(dist, axis=1)], train.labels)
        logger.debug(f"窗口 {w}: 留一精度 {acc:.4f}")
        if acc > best_acc:
            best_w, best_acc = w, acc
    logger.info(f"✅ 选定DTW窗口 W={best_w}（留一精度 {best_acc:.4f}）")
    return best_w


def knn1_baseline(test: TscDataset, train: TscDataset, metric: str,
                  window: Optional[int] = None) -> np.ndarray:
    """1-NN基线：ed、dtw 或 dtww（窗口未给出时按留一法选择）

    最近邻平局取训练集中最靠前的样本。
    """
    if len(train) == 0:
        raise DataError("1-NN 基线需要非空训练集")
    band = None
    if metric == "dtww":
        w = select_window(train) if window is None else int(window)
        band = BandConstraint.sakoe_chiba(w)
    dist = pairwise_distances(test.sequences, train.sequences, metric, band)
    return train.labels[np.argmin(dist, axis=1)]


def dba_baseline(test: TscDataset, train: TscDataset) -> np.ndarray:
    """DBA原型 + 1-NN"""
    protoset = init_dba_prototypes(train.sequences, train.labels, train.max_length, train.num_classes)
    return predict_all(test, protoset)


def run_baseline(method: str, train: TscDataset, test: TscDataset, window: Optional[int] = None) -> float:
    """运行一个基线方法并返回测试精度"""
    if method not in BASELINE_METHODS:
        raise DataError(f"未知的基线方法: {method}（可选 {', '.join(BASELINE_METHODS)}）")
    if method == "dba":
        pred = dba_baseline(test, train)
    else:
        pred = knn1_baseline(test, train, method, window)
    return accuracy(pred, test.labels)


@dataclass
class ComparisonReport:
    """方法 × 数据集精度表的平均排名与两两不差率"""
    ranks: pd.DataFrame
    mean_ranks: pd.Series
    no_worse: pd.DataFrame

    def to_frame(self) -> pd.DataFrame:
        """平均排名 + 两两不差率合成一张表"""
        frame = self.no_worse.copy()
        frame.insert(0, "mean_rank", self.mean_ranks)
        return frame


def comparison_report(table: pd.DataFrame) -> ComparisonReport:
    """每个数据集内按精度排名（平局取平均名次），并计算 A ≥ B 的数据集比例"""
    if table.shape[1] < 2:
        raise DataError(f"比较报告至少需要 2 个方法，实际 {table.shape[1]}")
    if table.empty:
        raise DataError("精度表为空")
    missing = table.isna()
    if missing.values.any():
        cells = [f"{table.index[r]}/{table.columns[c]}" for r, c in zip(*np.nonzero(missing.values))]
        raise DataError(f"精度表存在缺失单元格: {cells}")

    values = table.astype(float)
    ranks = values.rank(axis=1, ascending=False, method="average")
    methods = list(values.columns)
    no_worse = pd.DataFrame(
        [[float((values[a] >= values[b]).mean()) for b in methods] for a in methods],
        index=methods, columns=methods,
    )
    return ComparisonReport(ranks=ranks, mean_ranks=ranks.mean(axis=0), no_worse=no_worse)
