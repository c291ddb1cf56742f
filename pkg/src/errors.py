#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
异常定义
命令行根据异常类型决定退出码
"""


class DtwError(Exception):
    """本项目所有异常的基类"""

    exit_code = 1


class UsageError(DtwError):
    """参数组合不合法"""

    exit_code = 1


class DataError(DtwError, ValueError):
    """输入数据、文件或形状不合法"""

    exit_code = 2


class NumericError(DtwError, ArithmeticError):
    """数值计算失败（损失非有限、带宽不可行等）"""

    exit_code = 3


def exit_code_for(exc: BaseException) -> int:
    """把异常映射为命令行退出码"""
    if isinstance(exc, DtwError):
        return exc.exit_code
    if isinstance(exc, (FloatingPointError, OverflowError, ZeroDivisionError)):
        return NumericError.exit_code
    if isinstance(exc, (ValueError, OSError)):
        return DataError.exit_code
    return 1
