#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
配置管理模块
默认超参数、训练配置数据类，以及JSON运行配置文件的加载与合并
"""

import os
import json
from dataclasses import dataclass, field, asdict, fields
from typing import Dict, Any, Optional, Tuple

from .errors import DataError
from .dtw_core import BandConstraint
from .logger_config import get_logger

logger = get_logger(__name__)


@dataclass
class TscConfig:
    """时间序列分类训练配置"""
    lam: float = 0.0
    temperature: float = 1.0
    epochs: int = 60
    batch_fraction: float = 0.2
    learning_rate: float = 1e-2
    seed: int = 0
    band: BandConstraint = field(default_factory=BandConstraint.none)

    def validate(self) -> "TscConfig":
        if self.lam < 0:
            raise DataError(f"lambda 必须非负: {self.lam}")
        if self.temperature <= 0:
            raise DataError(f"temperature 必须为正: {self.temperature}")
        if self.epochs < 0:
            raise DataError(f"epochs 不能为负: {self.epochs}")
        if not 0 < self.batch_fraction <= 1:
            raise DataError(f"batch_fraction 必须在 (0, 1] 内: {self.batch_fraction}")
        if self.learning_rate <= 0:
            raise DataError(f"学习率必须为正: {self.learning_rate}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["band"] = self.band.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TscConfig":
        data = dict(data)
        if "band" in data and isinstance(data["band"], dict):
            data["band"] = BandConstraint.from_dict(data["band"])
        return cls(**_known_fields(cls, data))


@dataclass
class SegConfig:
    """弱监督分割训练配置"""
    delta: float = 1.0
    lam: float = 0.1
    q: int = 50
    tau_p: int = 8
    steps: int = 300
    batch_size: int = 16
    learning_rate: float = 1e-2
    seed: int = 0
    encoder: str = "identity"
    eval_every: int = 50
    init_max_members: int = 40
    background_id: Optional[int] = None

    def validate(self) -> "SegConfig":
        if self.delta < 0:
            raise DataError(f"margin delta 必须非负: {self.delta}")
        if self.lam < 0:
            raise DataError(f"lambda 必须非负: {self.lam}")
        if self.q < 1:
            raise DataError(f"Q 必须至少为 1: {self.q}")
        if self.tau_p < 1:
            raise DataError(f"tau_p 必须至少为 1: {self.tau_p}")
        if self.steps < 0 or self.batch_size < 1:
            raise DataError(f"steps/batch_size 不合法: {self.steps}/{self.batch_size}")
        if self.learning_rate <= 0:
            raise DataError(f"学习率必须为正: {self.learning_rate}")
        if self.eval_every < 1 or self.init_max_members < 1:
            raise DataError("eval_every 与 init_max_members 必须至少为 1")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SegConfig":
        return cls(**_known_fields(cls, data))


@dataclass
class SynthConfig:
    """合成分割语料配置"""
    k: int = 5
    m: int = 4
    tau_true: int = 8
    segments: Tuple[int, int] = (3, 6)
    duration: Tuple[int, int] = (8, 16)
    warp: float = 0.3
    noise: float = 0.1
    n_train: int = 200
    n_test: int = 50
    separation: float = 2.0
    max_retries: int = 200
    seed: int = 0

    def validate(self) -> "SynthConfig":
        if self.k < 1 or self.m < 1 or self.tau_true < 1:
            raise DataError("k、m、tau_true 必须至少为 1")
        for name in ("segments", "duration"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise DataError(f"{name} 范围不合法: {lo}:{hi}")
        if self.noise < 0 or self.warp < 0:
            raise DataError("noise 与 warp 必须非负")
        if self.warp >= 1:
            raise DataError(f"warp 必须小于 1 以保证单调: {self.warp}")
        if self.n_train < 0 or self.n_test < 0:
            raise DataError("样本数不能为负")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["segments"] = list(self.segments)
        data["duration"] = list(self.duration)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        data = _known_fields(cls, data)
        for name in ("segments", "duration"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)


def _known_fields(cls, data: Dict[str, Any]) -> Dict[str, Any]:
    """只保留数据类中声明过的字段"""
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        logger.warning(f"⚠️  忽略未知配置项: {sorted(unknown)}")
    return {key: value for key, value in data.items() if key in names}


class Config:
    """配置管理类"""

    def __init__(self):
        # DTW带宽搜索：窗口上限为序列长度的 10%
        self.window_fraction = 0.1

        # DBA 默认参数
        self.dba_max_iters = 10
        self.dba_tol = 1e-6

        # Adam 默认参数
        self.adam_params = {
            "beta1": 0.9,
            "beta2": 0.999,
            "eps": 1e-8
        }

        # 学习率交叉验证
        self.lr_grid = [1e-3, 1e-2, 1e-1]
        self.lr_holdout_fraction = 0.25

        # 梯度检查
        self.grad_check_eps = 1e-5
        self.grad_check_tol = 1e-4

        # 模型文件格式版本
        self.model_format_version = 1

        self.tsc_defaults = TscConfig().to_dict()
        self.seg_defaults = SegConfig().to_dict()
        self.synth_defaults = SynthConfig().to_dict()

    def tsc_config(self, **overrides) -> TscConfig:
        """基于默认值构造TSC配置"""
        data = dict(self.tsc_defaults)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return TscConfig.from_dict(data).validate()

    def seg_config(self, **overrides) -> SegConfig:
        """基于默认值构造分割配置"""
        data = dict(self.seg_defaults)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return SegConfig.from_dict(data).validate()

    def synth_config(self, **overrides) -> SynthConfig:
        """基于默认值构造合成语料配置"""
        data = dict(self.synth_defaults)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return SynthConfig.from_dict(data).validate()


class RunConfigFile:
    """JSON运行配置文件

    文件为 {"tsc": {...}, "seg": {...}, "synth": {...}, "seed": n} 形式，
    只合并已知分组，未知分组忽略并记录警告。
    """

    SECTIONS = ("tsc", "seg", "synth")

    def __init__(self, config_file: str = None):
        self.config_file = config_file
        self.config: Dict[str, Any] = {section: {} for section in self.SECTIONS}
        self.config["seed"] = None
        if config_file:
            self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """从文件加载配置"""
        if not os.path.exists(self.config_file):
            raise DataError(f"配置文件不存在: {self.config_file}")

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                saved_config = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"配置文件不是合法JSON: {self.config_file} (第{e.lineno}行)") from e

        if not isinstance(saved_config, dict):
            raise DataError(f"配置文件顶层必须是对象: {self.config_file}")

        for key, value in saved_config.items():
            if key in self.SECTIONS and isinstance(value, dict):
                self.config[key].update(value)
            elif key == "seed":
                self.config["seed"] = int(value)
            else:
                logger.warning(f"⚠️  配置文件中的未知项已忽略: {key}")

        logger.info(f"✅ 配置已从 {self.config_file} 加载")
        return self.config

    def get(self, key: str, default=None):
        """获取配置值"""
        return self.config.get(key, default)

    def section(self, name: str) -> Dict[str, Any]:
        """获取某个分组（返回副本）"""
        return dict(self.config.get(name, {}))

    def export_config(self, file_path: str) -> bool:
        """导出配置到指定文件"""
        from .data_io import write_json  # data_io 依赖本模块
        write_json(self.config, file_path)
        logger.info(f"✅ 配置已导出到 {file_path}")
        return True


# 创建全局配置实例
config = Config()
