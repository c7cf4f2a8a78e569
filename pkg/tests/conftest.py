import numpy as np
import pytest

from charlid.network import ModelConfig, init_params
from charlid.numerics import Rng

TINY = dict(vocab_size=10, label_count=3, embed_dim=4, hidden_dim=6, window=12)


@pytest.fixture
def tiny_config():
    return ModelConfig(precision=64, **TINY)


@pytest.fixture
def tiny_model(tiny_config):
    return init_params(tiny_config, Rng(1234)), tiny_config
