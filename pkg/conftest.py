import pytest

from magnet.data.synth import SynthConfig, synth_generate
from magnet.models.mdunet import UNetConfig


def pytest_configure(config):
	config.addinivalue_line('markers', 'slow: training runs and full pipeline checks')


@pytest.fixture
def micro_config():
	return UNetConfig(tile_size=16, base_filters=2, seed=0)


@pytest.fixture(scope='session')
def micro_dataset():
	return synth_generate(SynthConfig(tiles=8, tile_size=16, pin_rate=24.0, seed=0))


@pytest.fixture(scope='session')
def dense_dataset():
	return synth_generate(SynthConfig(tiles=100, tile_size=32, pin_rate=12.0, seed=5))
