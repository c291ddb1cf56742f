#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
帧编码器模块
identity / affine / window_linear 三种逐帧编码器，输出长度与输入逐帧对应
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .dtw_core import as_sequence
from .errors import DataError
from .logger_config import get_logger

logger = get_logger(__name__)

ENCODER_KINDS = ("identity", "affine", "window")


def parse_encoder_spec(spec: str) -> Tuple[str, int]:
    """解析 identity / affine / window:<w>"""
    spec = (spec or "identity").strip().lower()
    if spec in ("identity", "affine"):
        return spec, 1
    if spec.startswith("window:"):
        try:
            width = int(spec.split(":", 1)[1])
        except ValueError:
            raise DataError(f"窗口编码器宽度不是整数: {spec}") from None
        if width < 1:
            raise DataError(f"窗口编码器宽度必须至少为 1: {spec}")
        return "window", width
    raise DataError(f"未知的编码器类型: {spec}（可选 identity、affine、window:<w>）")


@dataclass
class Encoder:
    """帧编码器 Φ(X; θ)

    线性类编码器的参数为 weight (m, m_in·w) 与 bias (m,)；identity 无参数。
    """
    kind: str
    m_in: int
    m_out: int
    window: int = 1
    weight: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise DataError(f"未知的编码器类型: {self.kind}")
        if self.kind == "identity":
            if self.m_in != self.m_out:
                raise DataError(f"identity 编码器要求输入输出维度一致: {self.m_in} vs {self.m_out}")
            self.window = 1
            return
        if self.kind == "affine":
            self.window = 1
        expected = (self.m_out, self.m_in * self.window)
        if self.weight is None or self.bias is None:
            raise DataError("线性编码器缺少参数")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.shape != expected or self.bias.shape != (self.m_out,):
            raise DataError(
                f"编码器参数形状不合法: weight {self.weight.shape}（应为 {expected}），"
                f"bias {self.bias.shape}（应为 ({self.m_out},)）"
            )

    @classmethod
    def create(cls, spec: str, m_in: int, m_out: int = None,
               rng: Optional[np.random.Generator] = None) -> "Encoder":
        """按规格创建编码器；维度一致时线性编码器从恒等映射起步"""
        kind, window = parse_encoder_spec(spec)
        m_out = m_in if m_out is None else m_out
        if kind == "identity":
            return cls("identity", m_in, m_out)

        fan_in = m_in * window
        if m_out == m_in:
            weight = np.zeros((m_out, fan_in))
            center = (window - 1) // 2
            weight[:, center * m_in:(center + 1) * m_in] = np.eye(m_in)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            weight = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(m_out, fan_in))
        return cls(kind, m_in, m_out, window, weight, np.zeros(m_out))

    @property
    def spec(self) -> str:
        return f"window:{self.window}" if self.kind == "window" else self.kind

    def params(self) -> Dict[str, np.ndarray]:
        """可训练参数"""
        if self.kind == "identity":
            return {}
        return {"encoder.weight": self.weight, "encoder.bias": self.bias}

    def with_params(self, params: Dict[str, np.ndarray]) -> "Encoder":
        """用新参数构造编码器"""
        if self.kind == "identity":
            return self
        return Encoder(self.kind, self.m_in, self.m_out, self.window,
                       params["encoder.weight"].copy(), params["encoder.bias"].copy())


def window_frames(X: np.ndarray, window: int) -> np.ndarray:
    """每帧拼接以它为中心的 w 帧，边缘补零，形状 (τ, m_in·w)"""
    tau, m_in = X.shape
    before = (window - 1) // 2
    padded = np.zeros((tau + window - 1, m_in))
    padded[before:before + tau] = X
    return np.concatenate([padded[k:k + tau] for k in range(window)], axis=1)


def encode(X, enc: Encoder) -> np.ndarray:
    """s = Φ(X; θ)"""
    X = as_sequence(X, "X")
    if X.shape[1] != enc.m_in:
        raise DataError(f"输入特征维度 {X.shape[1]} 与编码器输入维度 {enc.m_in} 不一致")
    if enc.kind == "identity":
        return X
    return window_frames(X, enc.window) @ enc.weight.T + enc.bias


def encoder_backward(X, enc: Encoder, upstream: np.ndarray) -> Dict[str, np.ndarray]:
    """给定损失对编码输出的梯度，求对 θ 的梯度"""
    X = as_sequence(X, "X")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (X.shape[0], enc.m_out):
        raise DataError(f"上游梯度形状 {upstream.shape} 与编码输出 ({X.shape[0]}, {enc.m_out}) 不一致")
    if enc.kind == "identity":
        return {}
    frames = window_frames(X, enc.window)
    return {
        "encoder.weight": upstream.T @ frames,
        "encoder.bias": upstream.sum(axis=0),
    }
