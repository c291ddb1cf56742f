#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
批量基准测试执行器
对数据根目录下的多个UCR数据集运行 DP-DTW 与 ED/DTW/DTW(W)/DBA 基线，输出精度表与比较报告
"""

import os
import sys
import time
import argparse
from datetime import datetime
from typing import Dict, List, Optional

import pandas as pd

from src.config import TscConfig, config
from src.data_io import find_ucr_files, load_ucr_dataset, write_csv, write_json
from src.errors import DataError, DtwError, exit_code_for
from src.logger_config import LOG_LEVELS, get_logger, setup_logger
from src.tsc_engine import (
    BASELINE_METHODS, accuracy, comparison_report, predict_all, run_baseline,
    select_learning_rate, train_tsc,
)

logger = get_logger(__name__)

DP_DTW = "DP-DTW"
METHOD_COLUMNS = {"ed": "ED", "dtw": "DTW", "dtww": "DTW(W)", "dba": "DBA"}


class BenchmarkExecutor:
    """批量基准测试执行器 - 每个数据集一行，每个方法一列"""

    def __init__(self, data_root: str, output_base_dir: str = "benchmark_output",
                 datasets: Optional[List[str]] = None, tsc_config: TscConfig = None,
                 lr_cv: bool = False, window: Optional[int] = None):
        self.data_root = data_root
        self.output_base_dir = output_base_dir
        self.target_datasets = datasets
        self.tsc_config = tsc_config or config.tsc_config()
        self.lr_cv = lr_cv
        self.window = window
        self.failed_datasets: List[Dict[str, str]] = []
        self.results: Dict[str, Dict[str, float]] = {}
        self.start_time = None

    def discover_datasets(self) -> List[str]:
        """数据根目录下含有 *_TRAIN/*_TEST 文件的子目录"""
        if not os.path.isdir(self.data_root):
            raise DataError(f"数据根目录不存在: {self.data_root}")
        if self.target_datasets:
            missing = [d for d in self.target_datasets if not os.path.isdir(os.path.join(self.data_root, d))]
            if missing:
                raise DataError(f"以下数据集目录不存在: {missing}")
            return list(self.target_datasets)

        found = []
        for name in sorted(os.listdir(self.data_root)):
            path = os.path.join(self.data_root, name)
            if not os.path.isdir(path):
                continue
            try:
                find_ucr_files(path)
            except DataError:
                logger.debug(f"跳过非UCR目录: {path}")
                continue
            found.append(name)
        return found

    def run_benchmark(self) -> pd.DataFrame:
        """运行全部数据集并生成报告，返回精度表"""
        logger.info("=" * 60)
        logger.info("🚀 批量基准测试")
        logger.info("=" * 60)

        self.start_time = time.time()
        os.makedirs(self.output_base_dir, exist_ok=True)

        datasets = self.discover_datasets()
        if not datasets:
            raise DataError(f"{self.data_root} 下没有找到任何UCR数据集")
        logger.info(f"✅ 将处理以下数据集: {datasets}")

        for i, name in enumerate(datasets, 1):
            logger.info(f"\n--- 数据集 {i}/{len(datasets)}: {name} ---")
            try:
                self.results[name] = self._process_dataset(name)
            except DtwError as e:
                logger.error(f"❌ 数据集 {name} 失败: {e}")
                self.failed_datasets.append({"dataset": name, "error": str(e)})

        if not self.results:
            raise DataError("所有数据集都失败了，无法生成精度表")
        table = self._accuracy_table()
        write_csv(table, os.path.join(self.output_base_dir, "accuracy_table.csv"), index_label="dataset")
        self._generate_report(table)
        return table

    def _process_dataset(self, name: str) -> Dict[str, float]:
        """单个数据集：训练 DP-DTW 并运行四个基线"""
        train, test = load_ucr_dataset(os.path.join(self.data_root, name))
        cfg = self.tsc_config
        timings: Dict[str, float] = {}
        row: Dict[str, float] = {}

        started = time.time()
        if self.lr_cv:
            cfg = TscConfig.from_dict({**cfg.to_dict(), "learning_rate": select_learning_rate(train, cfg)})
        model = train_tsc(train, cfg)
        row[DP_DTW] = accuracy(predict_all(test, model.prototypes, cfg.band), test.labels)
        timings[DP_DTW] = time.time() - started
        logger.info(f"📊 {DP_DTW}: {row[DP_DTW]:.4f}（{timings[DP_DTW]:.1f} 秒）")

        for method in BASELINE_METHODS:
            started = time.time()
            column = METHOD_COLUMNS[method]
            row[column] = run_baseline(method, train, test, self.window if method == "dtww" else None)
            timings[column] = time.time() - started
            logger.info(f"📊 {column}: {row[column]:.4f}（{timings[column]:.1f} 秒）")

        write_json({
            "dataset": name,
            "n_train": len(train),
            "n_test": len(test),
            "num_classes": train.num_classes,
            "length": train.max_length,
            "accuracy": row,
            "seconds": timings,
            "learning_rate": cfg.learning_rate,
            "timestamp": datetime.now().isoformat(),
        }, os.path.join(self.output_base_dir, f"{name}.json"))
        return row

    def _accuracy_table(self) -> pd.DataFrame:
        columns = [DP_DTW] + [METHOD_COLUMNS[m] for m in BASELINE_METHODS]
        table = pd.DataFrame.from_dict(self.results, orient="index")[columns]
        table.index.name = "dataset"
        return table

    def _generate_report(self, table: pd.DataFrame):
        """平均排名、两两不差率与 DP-DTW 相对各基线的不差率"""
        report = comparison_report(table)
        total_time = time.time() - self.start_time if self.start_time else 0

        logger.info("\n" + "=" * 60)
        logger.info("📊 基准测试报告")
        logger.info("=" * 60)
        for method, rank in report.mean_ranks.items():
            logger.info(f"   {method}: 平均排名 {rank:.3f}")
        dp_rates = {f"{DP_DTW} >= {other}": float(report.no_worse.loc[DP_DTW, other])
                    for other in table.columns if other != DP_DTW}
        for key, rate in dp_rates.items():
            logger.info(f"   {key}: {rate * 100:.1f}%")
        logger.info(f"⏰ 总用时: {total_time / 60:.1f} 分钟")
        if self.failed_datasets:
            logger.warning(f"⚠️  失败的数据集: {[d['dataset'] for d in self.failed_datasets]}")

        write_json({
            "summary": {
                "datasets": len(table),
                "failed": len(self.failed_datasets),
                "seconds": total_time,
            },
            "mean_ranks": report.mean_ranks.to_dict(),
            "no_worse": report.no_worse.to_dict(orient="index"),
            "dp_dtw_no_worse": dp_rates,
            "failed_datasets": self.failed_datasets,
            "timestamp": datetime.now().isoformat(),
        }, os.path.join(self.output_base_dir, "benchmark_report.json"))
        logger.info(f"\n📄 详细报告已保存: {self.output_base_dir}")


def main(argv: List[str] = None) -> int:
    """独立运行入口，参数与 main.py benchmark 子命令一致"""
    parser = argparse.ArgumentParser(description="UCR批量基准测试")
    parser.add_argument("--data-root", required=True)
    parser.add_argument("--datasets", default=None, help="逗号分隔的数据集名")
    parser.add_argument("--out-dir", default="benchmark_output")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--log-level", default="INFO", choices=LOG_LEVELS)
    args = parser.parse_args(argv)

    setup_logger(args.log_level)
    datasets = [d.strip() for d in args.datasets.split(",") if d.strip()] if args.datasets else None
    try:
        executor = BenchmarkExecutor(args.data_root, args.out_dir, datasets, config.tsc_config(seed=args.seed))
        executor.run_benchmark()
    except KeyboardInterrupt:
        logger.warning("\n⚠️  用户中断批量执行")
        return 1
    except Exception as e:
        logger.error(f"❌ 批量执行出错: {e}")
        return exit_code_for(e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
