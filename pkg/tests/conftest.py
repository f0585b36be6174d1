import pathlib

import pytest

from lightcam.model import Model, ModelConfig, init_weights

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def default_config():
    return ModelConfig()


@pytest.fixture(scope="session")
def default_store(default_config):
    return init_weights(default_config, seed=7)


@pytest.fixture(scope="session")
def default_model(default_config, default_store):
    return Model.build(default_config, default_store)


@pytest.fixture(scope="session")
def demo_wav_bytes():
    return (DATA_DIR / "demo_3s.wav").read_bytes()
