#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
模型定义
原型 + 编码器 + 配置快照 + 类别词表（+ 参考转录集），可持久化
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List

from .config import config
from .encoder import Encoder
from .errors import DataError
from .prototype_store import PrototypeSet

MODES = ("tsc", "segmentation")


@dataclass
class Model:
    """训练得到的模型"""
    mode: str
    vocabulary: List[str]
    prototypes: PrototypeSet
    encoder: Encoder
    config: Dict[str, Any]
    reference_set: List[List[int]] = field(default_factory=list)
    history: List[Dict[str, float]] = field(default_factory=list)
    version: int = field(default_factory=lambda: config.model_format_version)

    def __post_init__(self):
        self.validate()

    def validate(self) -> "Model":
        if self.mode not in MODES:
            raise DataError(f"未知的模型模式: {self.mode}")
        if len(self.vocabulary) != self.prototypes.num_classes:
            raise DataError(
                f"词表大小 {len(self.vocabulary)} 与原型数 {self.prototypes.num_classes} 不一致"
            )
        if self.encoder.m_out != self.prototypes.m:
            raise DataError(f"编码器输出维度 {self.encoder.m_out} 与原型维度 {self.prototypes.m} 不一致")
        if self.mode == "segmentation" and not self.reference_set:
            raise DataError("分割模型缺少参考转录集")
        return self

    @property
    def num_classes(self) -> int:
        return self.prototypes.num_classes
