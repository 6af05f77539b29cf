"""
Shared fixtures: toy-sized configurations, scenes and models.
"""

import numpy as np
import pytest

from core.harness import gen_scene
from core.pipeline import init_model
from core.schemas import build_run_config


TOY = {
    "token_dim": 8,
    "num_heads": 2,
    "num_blocks": 2,
    "mlp_ratio": 2,
    "image_size": 28,
    "patch_size": 14,
    "state_dim": 4,
    "expand": 1,
    "horizon": 3,
    "window_length": 2,
    "stride": 2,
    "injection_layers": [0, 1],
    "stage1_steps": 3,
    "stage1_windows": 2,
    "stage2_steps": 0,
}


def toy_config(**overrides):
    return build_run_config({**TOY, **overrides})


@pytest.fixture
def config():
    return toy_config()


@pytest.fixture
def model(config):
    return init_model(config)


@pytest.fixture
def scene(config):
    return gen_scene(0, 8, "orbit", config.image_size, config.patch_size, config.channels)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
