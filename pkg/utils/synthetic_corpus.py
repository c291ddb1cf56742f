#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
合成分割语料生成器
K个平滑类别模板（随机游走），每个样本按随机顺序拼接若干段时间扭曲 + 噪声的模板实现，
逐帧真实标签与转录同时生成
"""

import os
from dataclasses import dataclass
from typing import List

import numpy as np

from src.config import SynthConfig
from src.data_io import write_seg_corpus, write_json
from src.errors import DataError
from src.logger_config import get_logger
from src.weak_seg_engine import SegSample

logger = get_logger(__name__)


@dataclass
class SyntheticCorpus:
    """训练/测试两个划分与生成它们的模板"""
    train: List[SegSample]
    test: List[SegSample]
    templates: np.ndarray
    config: SynthConfig


def draw_templates(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """逐个抽取模板，距已有模板小于分离下限的重新抽取"""
    templates: List[np.ndarray] = []
    for k in range(cfg.k):
        for attempt in range(cfg.max_retries):
            offset = rng.normal(0.0, 1.5, size=(1, cfg.m))
            walk = np.cumsum(rng.normal(0.0, 0.5, size=(cfg.tau_true, cfg.m)), axis=0)
            candidate = offset + walk
            if all(np.linalg.norm(candidate - t) >= cfg.separation for t in templates):
                templates.append(candidate)
                break
        else:
            raise DataError(
                f"第 {k + 1} 个模板在 {cfg.max_retries} 次重试后仍无法满足分离下限 {cfg.separation}"
            )
    return np.stack(templates)


def warp_template(template: np.ndarray, duration: int, warp: float,
                  rng: np.random.Generator) -> np.ndarray:
    """随机单调重采样到指定时长；warp=0 时为均匀线性插值"""
    tau = template.shape[0]
    if duration == 1 or tau == 1:
        positions = np.zeros(duration)
    elif warp == 0:
        positions = np.linspace(0.0, tau - 1, duration)
    else:
        steps = 1.0 + warp * rng.uniform(-1.0, 1.0, size=duration - 1)
        positions = np.concatenate([[0.0], np.cumsum(steps)])
        positions = positions / positions[-1] * (tau - 1)
    grid = np.arange(tau)
    return np.stack([np.interp(positions, grid, template[:, d]) for d in range(template.shape[1])], axis=1)


def _draw_transcript(cfg: SynthConfig, rng: np.random.Generator) -> List[int]:
    """相邻两段类别不同（K=1 时除外）"""
    length = int(rng.integers(cfg.segments[0], cfg.segments[1] + 1))
    transcript = [int(rng.integers(1, cfg.k + 1))]
    while len(transcript) < length:
        choice = int(rng.integers(1, cfg.k + 1))
        if cfg.k == 1 or choice != transcript[-1]:
            transcript.append(choice)
    return transcript


def make_sample(sample_id: str, templates: np.ndarray, cfg: SynthConfig,
                rng: np.random.Generator) -> SegSample:
    transcript = _draw_transcript(cfg, rng)
    pieces, labels = [], []
    for action in transcript:
        duration = int(rng.integers(cfg.duration[0], cfg.duration[1] + 1))
        piece = warp_template(templates[action - 1], duration, cfg.warp, rng)
        if cfg.noise > 0:
            piece = piece + rng.normal(0.0, cfg.noise, size=piece.shape)
        pieces.append(piece)
        labels.extend([action] * duration)
    return SegSample(sample_id, np.concatenate(pieces), transcript, np.asarray(labels))


def gen_synthetic(cfg: SynthConfig) -> SyntheticCorpus:
    """按配置生成语料，同一种子结果完全一致"""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    templates = draw_templates(cfg, rng)
    train = [make_sample(f"train_{i:04d}", templates, cfg, rng) for i in range(cfg.n_train)]
    test = [make_sample(f"test_{i:04d}", templates, cfg, rng) for i in range(cfg.n_test)]
    logger.info(f"✅ 合成语料生成完成: K={cfg.k} m={cfg.m} 训练 {len(train)} / 测试 {len(test)}")
    return SyntheticCorpus(train, test, templates, cfg)


def save_synthetic(corpus: SyntheticCorpus, out_dir: str):
    """写出 train.jsonl、test.jsonl 与 templates.json"""
    os.makedirs(out_dir, exist_ok=True)
    write_seg_corpus(corpus.train, os.path.join(out_dir, "train.jsonl"))
    write_seg_corpus(corpus.test, os.path.join(out_dir, "test.jsonl"))
    write_json({
        "config": corpus.config.to_dict(),
        "templates": corpus.templates.tolist(),
    }, os.path.join(out_dir, "templates.json"))
    logger.info(f"📁 合成语料已保存到: {out_dir}")
