# -*- coding: utf-8 -*-

import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from src.config import SynthConfig  # noqa: E402
from src.tsc_engine import TscDataset  # noqa: E402
from utils.synthetic_corpus import gen_synthetic  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def two_class_dataset():
    """常数0序列 vs 常数1序列，带少量抖动"""
    gen = np.random.default_rng(3)
    sequences, labels = [], []
    for label, level in ((1, 0.0), (2, 1.0)):
        for _ in range(6):
            sequences.append(level + 0.05 * gen.standard_normal(10))
            labels.append(label)
    train = TscDataset(sequences, labels, ["a", "b"], "train", "two_class")
    test_seqs = [np.zeros(10), np.ones(10), np.full(10, 0.1), np.full(10, 0.9)]
    test = TscDataset(test_seqs, [1, 2, 1, 2], ["a", "b"], "test", "two_class")
    return train, test


@pytest.fixture
def tiny_synth_config():
    return SynthConfig(k=3, m=2, tau_true=4, segments=(2, 3), duration=(4, 6), warp=0.2,
                       noise=0.05, n_train=12, n_test=4, separation=1.0, seed=5)


@pytest.fixture
def tiny_corpus(tiny_synth_config):
    return gen_synthetic(tiny_synth_config)
