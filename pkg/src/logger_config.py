#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
日志配置模块
loguru 控制台/文件输出，以及训练过程的行式记录格式
"""

import os
import sys
from typing import Any, Mapping

from loguru import logger

from .errors import UsageError

LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR")

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan>:<cyan>{function}</cyan> - "
    "<level>{message}</level>"
)

FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {extra[name]}:{function}:{line} - {message}"


def add_file_sink(log_file: str, log_level: str = "INFO") -> int:
    """追加一个按 10MB 轮转的日志文件，返回 sink id"""
    directory = os.path.dirname(log_file)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return logger.add(
        log_file,
        format=FILE_FORMAT,
        level=log_level,
        rotation="10 MB",
        retention="7 days",
        compression="zip",
        encoding="utf-8",
        diagnose=False,
    )


def setup_logger(log_level: str = "INFO", log_file: str = None):
    """重新配置全部 sink

    控制台只写 stderr，stdout 留给命令行结果（精度、报告表格等）。
    """
    log_level = str(log_level).upper()
    if log_level not in LOG_LEVELS:
        raise UsageError(f"未知的日志级别: {log_level}（可选 {', '.join(LOG_LEVELS)}）")

    logger.remove()
    logger.configure(extra={"name": "proto_dtw"})
    if sys.stderr is not None:
        logger.add(sys.stderr, format=CONSOLE_FORMAT, level=log_level, colorize=True, diagnose=False)
    if log_file:
        add_file_sink(log_file, log_level)
    return logger


def get_logger(name: str = None):
    """获取绑定了模块名的 logger"""
    return logger.bind(name=name) if name else logger


def format_record(record: Mapping[str, Any], key: str) -> str:
    """训练历史的一行：先写计数字段，其余浮点字段保留 6 位小数

    例如 epoch=3 loss=0.693147 ce=0.693147 dist=1.250000
    """
    parts = [f"{key}={record[key]}"]
    parts += [f"{name}={value:.6f}" for name, value in record.items() if name != key]
    return " ".join(parts)


# 导入即生效：控制台 INFO
setup_logger()
