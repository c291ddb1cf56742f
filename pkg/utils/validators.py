#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
命令行参数验证函数
每个函数返回 (是否有效, 说明)
"""

import os
import re

import pandas as pd

from src.encoder import parse_encoder_spec
from src.errors import DataError

RANGE_PATTERN = re.compile(r'^\s*(\d+)\s*:\s*(\d+)\s*$')


def validate_positive_int(value, name="参数"):
    """验证正整数"""
    try:
        number = int(value)
    except (TypeError, ValueError):
        return False, f"{name}必须是整数: {value}"
    if number < 1:
        return False, f"{name}必须大于0: {number}"
    return True, f"{name}: {number}"


def validate_non_negative(value, name="参数"):
    """验证非负实数"""
    try:
        number = float(value)
    except (TypeError, ValueError):
        return False, f"{name}必须是数字: {value}"
    if not number >= 0:
        return False, f"{name}必须非负: {value}"
    return True, f"{name}: {number}"


def validate_lambda(value):
    """验证正则化系数 λ ≥ 0"""
    return validate_non_negative(value, "lambda")


def validate_delta(value):
    """验证铰链间隔 δ ≥ 0"""
    return validate_non_negative(value, "delta")


def validate_batch_fraction(value):
    """验证批比例 f ∈ (0, 1]"""
    try:
        fraction = float(value)
    except (TypeError, ValueError):
        return False, f"批比例必须是数字: {value}"
    if not 0 < fraction <= 1:
        return False, f"批比例必须在 (0, 1] 内: {fraction}"
    return True, f"批比例: {fraction}"


def validate_learning_rate(value):
    """验证学习率：正数或 cv"""
    if str(value).strip().lower() == "cv":
        return True, "学习率: 交叉验证选择"
    try:
        rate = float(value)
    except (TypeError, ValueError):
        return False, f"学习率必须是正数或 cv: {value}"
    if rate <= 0:
        return False, f"学习率必须为正: {rate}"
    return True, f"学习率: {rate}"


def validate_encoder_spec(value):
    """验证编码器描述：identity | affine | window:w"""
    try:
        kind, window = parse_encoder_spec(value)
    except DataError as e:
        return False, str(e)
    return True, f"编码器: {kind} (窗口 {window})"


def validate_range(value):
    """验证 a:b 形式的整数范围，要求 1 ≤ a ≤ b"""
    match = RANGE_PATTERN.match(str(value or ""))
    if not match:
        return False, f"范围格式应为 a:b: {value}"
    lo, hi = int(match.group(1)), int(match.group(2))
    if lo < 1 or hi < lo:
        return False, f"范围必须满足 1 ≤ a ≤ b: {value}"
    return True, f"范围: {lo}..{hi}"


def parse_range(value):
    """解析已验证的 a:b 范围"""
    match = RANGE_PATTERN.match(str(value))
    return int(match.group(1)), int(match.group(2))


def validate_table_file(file_path):
    """验证准确率表文件（.csv 或 .xlsx）"""
    if not file_path:
        return False, "请指定准确率表文件"

    if not os.path.exists(file_path):
        return False, f"文件不存在: {file_path}"

    if not file_path.lower().endswith(('.csv', '.xlsx')):
        return False, "文件格式不正确，请使用 .csv 或 .xlsx"

    if file_path.lower().endswith('.xlsx'):
        try:
            excel_file = pd.ExcelFile(file_path)
            if not excel_file.sheet_names:
                return False, "Excel文件没有工作表"
        except Exception as e:
            return False, f"无法读取Excel文件: {e}"

    return True, "准确率表文件有效"
