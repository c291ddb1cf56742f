#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
判别式原型 DTW 命令行
主入口文件：时间序列分类、弱监督分割、动作摘要、合成语料与批量基准测试

退出码：0 成功，1 用法错误，2 数据错误，3 数值失败
"""

import os
import sys
import argparse
from dataclasses import replace
from typing import Any, Callable, Dict, List

import pandas as pd

from batch_executor import BenchmarkExecutor
from src.config import RunConfigFile, TscConfig, config
from src.data_io import (
    find_ucr_files, load_model, load_seg_corpus, load_ucr_dataset, load_ucr_tsv, save_model, write_csv,
    write_json, write_lines,
)
from src.dtw_core import BandConstraint
from src.encoder import encode
from src.errors import DataError, UsageError, exit_code_for
from src.logger_config import LOG_LEVELS, get_logger, setup_logger
from src.seg_metrics import aggregate_metrics, summary_accuracy, uniform_summary
from src.tsc_engine import (
    BASELINE_METHODS, accuracy, comparison_report, predict_all, run_baseline, select_learning_rate, train_tsc,
)
from src.weak_seg_engine import infer_labels, summarize, train_seg
from utils.synthetic_corpus import gen_synthetic, save_synthetic
from utils.validators import (
    parse_range, validate_batch_fraction, validate_delta, validate_encoder_spec, validate_lambda,
    validate_learning_rate, validate_non_negative, validate_positive_int, validate_range, validate_table_file,
)

logger = get_logger(__name__)


class CliParser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束（argparse 默认是 2，与数据错误冲突）"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(UsageError.exit_code, f"{self.prog}: 错误: {message}\n")


def _checked(validator: Callable, convert: Callable = str):
    """把 (is_valid, msg) 形式的验证函数包装成 argparse 的 type"""
    def parse(value):
        ok, msg = validator(value)
        if not ok:
            raise argparse.ArgumentTypeError(msg)
        return convert(value)
    return parse


positive_int = _checked(validate_positive_int, int)
non_negative = _checked(validate_non_negative, float)


def _non_negative_int(value):
    ok, msg = validate_non_negative(value, "窗口")
    if not ok or float(value) != int(float(value)):
        raise argparse.ArgumentTypeError(msg if not ok else f"窗口必须是整数: {value}")
    return int(float(value))


def _positive_float(value):
    ok, msg = validate_learning_rate(value)
    if not ok or str(value).strip().lower() == "cv":
        raise argparse.ArgumentTypeError(msg if not ok else "此处学习率必须是正数")
    return float(value)


def _merge(section: Dict[str, Any], **cli) -> Dict[str, Any]:
    """配置文件分组 + 命令行显式给出的值（None 表示未给出）"""
    merged = dict(section)
    merged.update({k: v for k, v in cli.items() if v is not None})
    return merged


def _seed(args, run_config: RunConfigFile):
    return args.seed if args.seed is not None else run_config.get("seed")


def _require_mode(model, mode: str):
    if model.mode != mode:
        raise DataError(f"模型模式为 {model.mode}，此命令需要 {mode} 模型")


def _write_history(history: List[Dict[str, float]], path: str):
    if path:
        write_csv(pd.DataFrame(history), path, index=False)
        logger.info(f"📁 训练历史已保存: {path}")


# ---------------------------------------------------------------- 时间序列分类

def cmd_train_tsc(args, run_config: RunConfigFile) -> int:
    train, _ = load_ucr_dataset(args.data)
    use_cv = args.lr is not None and args.lr.strip().lower() == "cv"
    cfg = config.tsc_config(**_merge(
        run_config.section("tsc"),
        lam=args.lam,
        temperature=args.temperature,
        epochs=args.epochs,
        batch_fraction=args.batch_fraction,
        learning_rate=None if use_cv or args.lr is None else float(args.lr),
        band=BandConstraint.sakoe_chiba(args.band) if args.band is not None else None,
        seed=_seed(args, run_config),
    ))
    if use_cv:
        cfg = replace(cfg, learning_rate=select_learning_rate(train, cfg))

    model = train_tsc(train, cfg)
    save_model(model, args.out)
    _write_history(model.history, args.history_csv)
    train_acc = accuracy(predict_all(train, model.prototypes, cfg.band), train.labels)
    print(f"train_accuracy={train_acc:.6f}")
    print(f"model={args.out}")
    return 0


def cmd_eval_tsc(args, run_config: RunConfigFile) -> int:
    model = load_model(args.model)
    _require_mode(model, "tsc")
    _, test_path = find_ucr_files(args.data)
    test = load_ucr_tsv(test_path, vocabulary=model.vocabulary, split="test")
    band = TscConfig.from_dict(model.config).band
    acc = accuracy(predict_all(test, model.prototypes, band), test.labels)
    logger.info(f"📊 测试精度: {acc:.4f}（{len(test)} 条序列）")
    print(f"accuracy={acc:.6f}")
    return 0


def cmd_baseline(args, run_config: RunConfigFile) -> int:
    if args.window is not None and args.method != "dtww":
        raise UsageError("--window 只适用于 dtww 方法")
    train, test = load_ucr_dataset(args.data)
    acc = run_baseline(args.method, train, test, args.window)
    logger.info(f"📊 {args.method} 测试精度: {acc:.4f}")
    print(f"accuracy={acc:.6f}")
    return 0


def cmd_report(args, run_config: RunConfigFile) -> int:
    ok, msg = validate_table_file(args.table)
    if not ok:
        raise DataError(msg)
    if args.table.lower().endswith(".xlsx"):
        table = pd.read_excel(args.table, index_col=0)
    else:
        table = pd.read_csv(args.table, index_col=0)
    report = comparison_report(table)
    frame = report.to_frame()
    frame.to_csv(sys.stdout, float_format="%.6f", index_label="method")
    if args.out:
        write_csv(frame, args.out, float_format="%.6f", index_label="method")
        logger.info(f"📁 比较报告已保存: {args.out}")
    return 0


# ---------------------------------------------------------------- 弱监督分割

def cmd_train_seg(args, run_config: RunConfigFile) -> int:
    cfg = config.seg_config(**_merge(
        run_config.section("seg"),
        lam=args.lam,
        delta=args.delta,
        q=args.q,
        tau_p=args.tau_p,
        encoder=args.encoder,
        steps=args.steps,
        batch_size=args.batch,
        learning_rate=args.lr,
        background_id=args.background,
        seed=_seed(args, run_config),
    ))
    samples = load_seg_corpus(args.data, background_id=cfg.background_id)
    model = train_seg(samples, cfg)
    save_model(model, args.out)
    _write_history(model.history, args.history_csv)
    print(f"model={args.out}")
    return 0


def _background(args, model):
    if args.background is not None:
        return args.background
    return model.config.get("background_id")


def cmd_eval_seg(args, run_config: RunConfigFile) -> int:
    model = load_model(args.model)
    _require_mode(model, "segmentation")
    background = _background(args, model)
    samples = load_seg_corpus(args.data, num_classes=model.num_classes, background_id=background)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)

    preds, gts = [], []
    for sample in samples:
        labels, _ = infer_labels(model, sample, args.setting)
        if args.out_dir:
            write_lines(labels, os.path.join(args.out_dir, f"{sample.id}.txt"))
        if sample.gt_labels is not None:
            preds.append(labels)
            gts.append(sample.gt_labels)

    if not gts:
        logger.warning("⚠️  语料中没有逐帧真实标签，只输出预测结果")
        return 0
    metrics = aggregate_metrics(preds, gts, background, exclude_background=not args.include_background)
    logger.info(f"📊 {args.setting}: F-acc={metrics.f_acc:.4f} IoU={metrics.iou:.4f} IoD={metrics.iod:.4f}")
    if args.out_dir:
        write_json({"setting": args.setting, "videos": len(gts), **metrics.to_dict()},
                   os.path.join(args.out_dir, "metrics.json"))
    print(f"f_acc={metrics.f_acc:.6f} iou={metrics.iou:.6f} iod={metrics.iod:.6f}")
    return 0


def cmd_summarize(args, run_config: RunConfigFile) -> int:
    model = load_model(args.model)
    _require_mode(model, "segmentation")
    samples = load_seg_corpus(args.data, num_classes=model.num_classes,
                              background_id=_background(args, model))
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)

    learned, uniform = [], []
    for sample in samples:
        summary = summarize(encode(sample.frames, model.encoder), sample.transcript, model.prototypes)
        if args.out_dir:
            write_lines(summary.key_indices, os.path.join(args.out_dir, f"{sample.id}.summary.txt"))
        if sample.gt_labels is not None:
            tau_p = model.prototypes.tau_p
            baseline = uniform_summary(sample.length, len(summary.key_indices))
            learned.append(summary_accuracy(summary.key_indices, sample.gt_labels, sample.transcript, tau_p))
            uniform.append(summary_accuracy(baseline, sample.gt_labels, sample.transcript, tau_p))

    if not learned:
        logger.warning("⚠️  语料中没有逐帧真实标签，无法计算匹配率")
        return 0
    rate, base = sum(learned) / len(learned), sum(uniform) / len(uniform)
    logger.info(f"📊 摘要匹配率: DP-DTW {rate:.4f} / 均匀采样 {base:.4f}")
    if args.out_dir:
        write_json({"videos": len(learned), "matching_rate": rate, "uniform_rate": base},
                   os.path.join(args.out_dir, "summary_metrics.json"))
    print(f"matching_rate={rate:.6f} uniform_rate={base:.6f}")
    return 0


# ---------------------------------------------------------------- 合成语料与批量测试

def cmd_synth_gen(args, run_config: RunConfigFile) -> int:
    cfg = config.synth_config(**_merge(
        run_config.section("synth"),
        k=args.k,
        m=args.m,
        tau_true=args.tau_true,
        segments=parse_range(args.segments) if args.segments else None,
        duration=parse_range(args.duration) if args.duration else None,
        warp=args.warp,
        noise=args.noise,
        n_train=args.n_train,
        n_test=args.n_test,
        seed=_seed(args, run_config),
    ))
    corpus = gen_synthetic(cfg)
    save_synthetic(corpus, args.out)
    for name in ("train.jsonl", "test.jsonl", "templates.json"):
        print(os.path.join(args.out, name))
    return 0


def cmd_benchmark(args, run_config: RunConfigFile) -> int:
    use_cv = args.lr is not None and args.lr.strip().lower() == "cv"
    cfg = config.tsc_config(**_merge(
        run_config.section("tsc"),
        lam=args.lam,
        epochs=args.epochs,
        learning_rate=None if use_cv or args.lr is None else float(args.lr),
        seed=_seed(args, run_config),
    ))
    datasets = [d.strip() for d in args.datasets.split(",") if d.strip()] if args.datasets else None
    executor = BenchmarkExecutor(args.data_root, args.out_dir, datasets, cfg, lr_cv=use_cv)
    table = executor.run_benchmark()
    table.to_csv(sys.stdout, float_format="%.6f")
    return 0


# ---------------------------------------------------------------- 参数解析

def build_parser() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="随机种子")
    common.add_argument("--config", default=None, help="JSON运行配置文件")
    common.add_argument("--log-level", default="INFO",
                        choices=LOG_LEVELS)
    common.add_argument("--log-file", default=None, help="日志文件（按10MB轮转）")
    common.add_argument("--dump-config", default=None, help="把生效的运行配置（含 --seed）导出为JSON")

    parser = CliParser(prog="main.py", description="判别式原型 DTW：时间序列分类与弱监督动作分割")
    sub = parser.add_subparsers(dest="command", metavar="<command>")
    sub.required = True

    p = sub.add_parser("train-tsc", parents=[common], help="训练时间序列分类原型")
    p.add_argument("--data", required=True, help="UCR数据集目录")
    p.add_argument("--lambda", dest="lam", type=_checked(validate_lambda, float))
    p.add_argument("--temperature", type=_positive_float)
    p.add_argument("--epochs", type=positive_int)
    p.add_argument("--batch-fraction", type=_checked(validate_batch_fraction, float))
    p.add_argument("--lr", type=_checked(validate_learning_rate), help="学习率或 cv")
    p.add_argument("--band", type=_non_negative_int, help="训练时的Sakoe-Chiba宽度")
    p.add_argument("--history-csv", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_tsc)

    p = sub.add_parser("eval-tsc", parents=[common], help="评估时间序列分类模型")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(handler=cmd_eval_tsc)

    p = sub.add_parser("baseline", parents=[common], help="运行1-NN或DBA基线")
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=BASELINE_METHODS)
    p.add_argument("--window", type=_non_negative_int)
    p.set_defaults(handler=cmd_baseline)

    p = sub.add_parser("report", parents=[common], help="精度表的平均排名与两两不差率")
    p.add_argument("--table", required=True, help=".csv 或 .xlsx")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("train-seg", parents=[common], help="训练弱监督分割模型")
    p.add_argument("--data", required=True, help="JSONL分割语料")
    p.add_argument("--lambda", dest="lam", type=_checked(validate_lambda, float))
    p.add_argument("--delta", type=_checked(validate_delta, float))
    p.add_argument("--q", type=positive_int)
    p.add_argument("--tau-p", type=positive_int)
    p.add_argument("--encoder", type=_checked(validate_encoder_spec))
    p.add_argument("--steps", type=_checked(lambda v: validate_non_negative(v, "steps"), int))
    p.add_argument("--batch", type=positive_int)
    p.add_argument("--lr", type=_positive_float)
    p.add_argument("--background", type=positive_int, help="背景类别 id")
    p.add_argument("--history-csv", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_seg)

    p = sub.add_parser("eval-seg", parents=[common], help="评估分割模型")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--setting", default="segmentation", choices=["segmentation", "alignment"])
    p.add_argument("--out-dir", default=None)
    p.add_argument("--background", type=positive_int)
    p.add_argument("--include-background", action="store_true", help="IoU/IoD 也统计背景类")
    p.set_defaults(handler=cmd_eval_seg)

    p = sub.add_parser("summarize", parents=[common], help="动作摘要")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--background", type=positive_int)
    p.set_defaults(handler=cmd_summarize)

    p = sub.add_parser("synth-gen", parents=[common], help="生成合成分割语料")
    p.add_argument("--k", type=positive_int)
    p.add_argument("--m", type=positive_int)
    p.add_argument("--tau-true", type=positive_int)
    p.add_argument("--segments", type=_checked(validate_range))
    p.add_argument("--duration", type=_checked(validate_range))
    p.add_argument("--warp", type=non_negative)
    p.add_argument("--noise", type=non_negative)
    p.add_argument("--n-train", type=_checked(lambda v: validate_non_negative(v, "n-train"), int))
    p.add_argument("--n-test", type=_checked(lambda v: validate_non_negative(v, "n-test"), int))
    p.add_argument("--out", required=True, help="输出目录")
    p.set_defaults(handler=cmd_synth_gen)

    p = sub.add_parser("benchmark", parents=[common], help="多个UCR数据集的批量基准测试")
    p.add_argument("--data-root", required=True)
    p.add_argument("--datasets", default=None, help="逗号分隔的数据集名")
    p.add_argument("--lambda", dest="lam", type=_checked(validate_lambda, float))
    p.add_argument("--epochs", type=positive_int)
    p.add_argument("--lr", type=_checked(validate_learning_rate))
    p.add_argument("--out-dir", default="benchmark_output")
    p.set_defaults(handler=cmd_benchmark)

    return parser


def main(argv: List[str] = None) -> int:
    """主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    try:
        setup_logger(args.log_level, args.log_file)
        run_config = RunConfigFile(args.config)
        if args.dump_config:
            if args.seed is not None:
                run_config.config["seed"] = args.seed
            run_config.export_config(args.dump_config)
        return args.handler(args, run_config)
    except KeyboardInterrupt:
        logger.warning("\n⚠️  用户中断执行")
        return 1
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"❌ {args.command} 失败（退出码 {code}）: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
