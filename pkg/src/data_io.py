#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
数据读写模块
UCR格式读写、分割语料JSONL读写、模型文件持久化

所有加载器只拒绝不修复，错误信息带行号或记录号。
"""

import os
import io
import glob
import json
import hashlib
import tempfile
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import config
from .encoder import Encoder
from .errors import DataError
from .logger_config import get_logger
from .model import Model
from .prototype_store import PrototypeSet
from .tsc_engine import TscDataset
from .weak_seg_engine import SegSample

logger = get_logger(__name__)

CHECKSUM_PREFIX = "#checksum sha256:"


# ---------------------------------------------------------------- UCR

def _detect_separator(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def load_ucr_tsv(path: str, vocabulary: List[str] = None, split: str = "train") -> TscDataset:
    """读取UCR格式文件：每行 标签 + 数值，制表符或逗号分隔

    vocabulary 为空时由本文件的标签生成（数值顺序），否则必须覆盖所有标签。
    """
    if not os.path.exists(path):
        raise DataError(f"文件不存在: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise DataError(f"数据集为空: {path}")

    sep = _detect_separator(next(line for line in lines if line.strip()))
    try:
        frame = pd.read_csv(io.StringIO(text), sep=sep, header=None, dtype=str,
                            skip_blank_lines=False, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: 行长度不一致 ({e})") from e

    labels_raw: List[str] = []
    rows: List[np.ndarray] = []
    width = None
    for line_no, row in enumerate(frame.itertuples(index=False), start=1):
        cells = [c.strip() if isinstance(c, str) else "" for c in row]
        if not any(cells):
            raise DataError(f"{path}:{line_no}: 空行")
        if any(c == "" for c in cells):
            raise DataError(f"{path}:{line_no}: 存在缺失值或长度不一致")
        if len(cells) < 2:
            raise DataError(f"{path}:{line_no}: 只有标签没有数值")
        try:
            values = np.array([float(c) for c in cells[1:]], dtype=np.float64)
        except ValueError as e:
            raise DataError(f"{path}:{line_no}: 存在无法解析的数值 ({e})") from e
        if not np.all(np.isfinite(values)):
            raise DataError(f"{path}:{line_no}: 存在缺失或非有限的数值")
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataError(f"{path}:{line_no}: 序列长度 {len(values)} 与前面的 {width} 不一致")
        labels_raw.append(_canonical_label(cells[0]))
        rows.append(values)

    if vocabulary is None:
        vocabulary = sorted(set(labels_raw), key=_label_sort_key)
    index = {name: i + 1 for i, name in enumerate(vocabulary)}
    unknown = sorted(set(labels_raw) - set(index))
    if unknown:
        raise DataError(f"{path}: 出现训练集中没有的标签 {unknown}")

    labels = np.array([index[name] for name in labels_raw], dtype=np.int64)
    name = os.path.basename(path).rsplit("_", 1)[0]
    logger.info(f"📊 已读取 {path}: {len(rows)} 条序列，长度 {width}，{len(vocabulary)} 个类别")
    return TscDataset([r[:, None] for r in rows], labels, list(vocabulary), split, name)


def _canonical_label(label: str) -> str:
    """'1.0' 与 '1' 视为同一标签"""
    try:
        value = float(label)
    except ValueError:
        return label
    return str(int(value)) if value.is_integer() else label


def write_ucr_tsv(dataset: TscDataset, path: str):
    """按UCR格式写出（制表符分隔，浮点数以 repr 精度输出）"""
    lines = []
    for seq, label in zip(dataset.sequences, dataset.labels):
        if seq.shape[1] != 1:
            raise DataError("UCR格式只支持单变量序列")
        values = "\t".join(repr(float(v)) for v in seq[:, 0])
        lines.append(f"{dataset.vocabulary[label - 1]}\t{values}")
    atomic_write(path, "\n".join(lines) + "\n")


def find_ucr_files(data_dir: str) -> Tuple[str, str]:
    """在UCR 2018布局目录中找到 *_TRAIN 与 *_TEST 文件"""
    if not os.path.isdir(data_dir):
        raise DataError(f"数据目录不存在: {data_dir}")
    found = {}
    for split in ("TRAIN", "TEST"):
        matches = sorted(glob.glob(os.path.join(data_dir, f"*_{split}.tsv")) +
                         glob.glob(os.path.join(data_dir, f"*_{split}.csv")) +
                         glob.glob(os.path.join(data_dir, f"*_{split}.txt")))
        if not matches:
            raise DataError(f"{data_dir} 中找不到 *_{split} 文件")
        found[split] = matches[0]
    return found["TRAIN"], found["TEST"]


def load_ucr_dataset(data_dir: str) -> Tuple[TscDataset, TscDataset]:
    """读取一个UCR数据集的训练/测试划分，测试集沿用训练集的词表"""
    train_path, test_path = find_ucr_files(data_dir)
    train = load_ucr_tsv(train_path, split="train")
    test = load_ucr_tsv(test_path, vocabulary=train.vocabulary, split="test")
    if test.max_length != train.max_length:
        raise DataError(f"训练集长度 {train.max_length} 与测试集长度 {test.max_length} 不一致")
    return train, test


# ---------------------------------------------------------------- 分割语料

def load_seg_corpus(path: str, num_classes: int = None, background_id: int = None) -> List[SegSample]:
    """读取JSONL分割语料：每行 {id, frames, transcript, labels?}"""
    if not os.path.exists(path):
        raise DataError(f"文件不存在: {path}")
    samples: List[SegSample] = []
    m = None
    with open(path, "r", encoding="utf-8") as f:
        for record_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path} 第 {record_no} 条记录不是合法JSON: {e.msg}") from e
            sample = _parse_seg_record(record, f"{path} 第 {record_no} 条记录", num_classes, background_id)
            if m is None:
                m = sample.frames.shape[1]
            elif sample.frames.shape[1] != m:
                raise DataError(f"{path} 第 {record_no} 条记录的特征维度 {sample.frames.shape[1]} 与前面的 {m} 不一致")
            try:
                sample.check_consistency(background_id)
            except DataError as e:
                raise DataError(f"{path} 第 {record_no} 条记录: {e}") from e
            samples.append(sample)
    if not samples:
        raise DataError(f"语料为空: {path}")
    logger.info(f"📊 已读取分割语料 {path}: {len(samples)} 个样本，特征维度 {m}")
    return samples


def _parse_seg_record(record: Any, where: str, num_classes: Optional[int],
                      background_id: Optional[int] = None) -> SegSample:
    if not isinstance(record, dict):
        raise DataError(f"{where}: 必须是JSON对象")
    for key in ("id", "frames", "transcript"):
        if key not in record:
            raise DataError(f"{where}: 缺少字段 {key}")
    if not isinstance(record["id"], str):
        raise DataError(f"{where}: id 必须是字符串")

    frames = record["frames"]
    if not isinstance(frames, list) or not frames or not all(isinstance(r, list) and r for r in frames):
        raise DataError(f"{where}: frames 必须是非空的二维数组")
    if len({len(r) for r in frames}) != 1:
        raise DataError(f"{where}: frames 各帧维度不一致")
    try:
        frames = np.asarray(frames, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DataError(f"{where}: frames 含有非数值") from e

    transcript = _int_list(record["transcript"], where, "transcript")
    if not transcript:
        raise DataError(f"{where}: transcript 不能为空")
    labels = record.get("labels")
    if labels is not None:
        labels = _int_list(labels, where, "labels")
    for name, ids in (("transcript", transcript), ("labels", labels or [])):
        for value in ids:
            # 背景类只出现在 labels 中，可以超出模型的类别数
            if name == "labels" and value == background_id:
                continue
            if value < 1 or (num_classes is not None and value > num_classes):
                raise DataError(f"{where}: {name} 中的类别 id {value} 越界（类别 id 从 1 开始）")
    try:
        return SegSample(record["id"], frames, transcript, labels)
    except DataError as e:
        raise DataError(f"{where}: {e}") from e


def _int_list(value: Any, where: str, name: str) -> List[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise DataError(f"{where}: {name} 必须是整数数组")
    return list(value)


def seg_record(sample: SegSample) -> Dict[str, Any]:
    record = {
        "id": sample.id,
        "frames": sample.frames.tolist(),
        "transcript": list(sample.transcript),
    }
    if sample.gt_labels is not None:
        record["labels"] = sample.gt_labels.tolist()
    return record


def write_seg_corpus(samples: List[SegSample], path: str):
    """写出JSONL分割语料"""
    lines = [json.dumps(seg_record(s), ensure_ascii=False) for s in samples]
    atomic_write(path, "\n".join(lines) + "\n")
    logger.info(f"📁 分割语料已保存: {path}（{len(samples)} 个样本）")


# ---------------------------------------------------------------- 模型文件

def _encode_array(arr: np.ndarray) -> Dict[str, Any]:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "hex": [float(v).hex() for v in arr.ravel()]}


def _decode_array(data: Dict[str, Any]) -> np.ndarray:
    values = np.array([float.fromhex(v) for v in data["hex"]], dtype=np.float64)
    return values.reshape(data["shape"])


def model_to_payload(model: Model) -> Dict[str, Any]:
    enc = model.encoder
    encoder = {"kind": enc.kind, "m_in": enc.m_in, "m_out": enc.m_out, "window": enc.window}
    if enc.kind != "identity":
        encoder["weight"] = _encode_array(enc.weight)
        encoder["bias"] = _encode_array(enc.bias)
    return {
        "format": "proto-dtw-model",
        "version": model.version,
        "mode": model.mode,
        "vocabulary": list(model.vocabulary),
        "prototypes": _encode_array(model.prototypes.data),
        "encoder": encoder,
        "config": model.config,
        "reference_set": model.reference_set,
        "history": model.history,
    }


def payload_to_model(payload: Dict[str, Any]) -> Model:
    enc = payload["encoder"]
    encoder = Encoder(
        enc["kind"], enc["m_in"], enc["m_out"], enc.get("window", 1),
        _decode_array(enc["weight"]) if "weight" in enc else None,
        _decode_array(enc["bias"]) if "bias" in enc else None,
    )
    return Model(
        mode=payload["mode"],
        vocabulary=list(payload["vocabulary"]),
        prototypes=PrototypeSet(_decode_array(payload["prototypes"])),
        encoder=encoder,
        config=payload["config"],
        reference_set=[list(t) for t in payload.get("reference_set", [])],
        history=list(payload.get("history", [])),
        version=payload["version"],
    )


def dumps_model(model: Model) -> str:
    """序列化为带校验和尾行的文本"""
    body = json.dumps(model_to_payload(model), indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{body}{CHECKSUM_PREFIX}{digest}\n"


def loads_model(text: str, source: str = "<model>") -> Model:
    """解析模型文本，校验校验和与版本"""
    body, sep, trailer = text.rpartition(CHECKSUM_PREFIX)
    if not sep:
        raise DataError(f"{source}: 缺少校验和尾行，文件可能被截断")
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if trailer.strip() != digest:
        raise DataError(f"{source}: 校验和不匹配，文件已损坏")
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as e:
        raise DataError(f"{source}: 模型内容不是合法JSON") from e
    version = payload.get("version")
    if version != config.model_format_version:
        raise DataError(f"{source}: 模型格式版本 {version} 与当前支持的 {config.model_format_version} 不一致")
    try:
        return payload_to_model(payload)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{source}: 模型内容不完整 ({e})") from e


def save_model(model: Model, path: str):
    """原子写出模型文件"""
    atomic_write(path, dumps_model(model))
    logger.info(f"📁 模型已保存: {path}")


def load_model(path: str) -> Model:
    if not os.path.exists(path):
        raise DataError(f"模型文件不存在: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    model = loads_model(text, path)
    logger.info(f"✅ 模型已加载: {path}（{model.mode}，K={model.num_classes}）")
    return model


def atomic_write(path: str, text: str):
    """先写临时文件再改名"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_csv(frame: pd.DataFrame, path: str, **kwargs):
    """DataFrame 整文件写出，参数同 to_csv"""
    atomic_write(path, frame.to_csv(**kwargs))


def write_lines(values, path: str):
    """每行一个整数（逐帧标签、关键帧索引）"""
    atomic_write(path, "".join(f"{int(v)}\n" for v in values))


def write_json(data: Any, path: str):
    """写出JSON结果文件"""
    atomic_write(path, json.dumps(data, indent=2, ensure_ascii=False) + "\n")
