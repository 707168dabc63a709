import pytest

from config import config as defaults
from magnet.errors import ConfigError, MissingDataError
from magnet.run_config import config_hash, parse_key_values, resolve_config, synth_config, train_config, unet_config


def write(tmp_path, name, text):
	path = tmp_path / name
	path.write_text(text, encoding='utf-8')
	return str(path)


def test_defaults_resolve():
	run_config = resolve_config()
	assert run_config['tile_size'] == 64
	assert run_config['stage2_epochs'] == [4, 8]
	assert run_config['stage1_epochs'] is None
	assert set(run_config) == set(defaults)
	assert train_config(run_config).stage1_epochs == (2, 38, 62)
	assert unet_config(run_config).channel_ladder == [16, 32, 64, 128]


def test_unknown_key(tmp_path):
	with pytest.raises(ConfigError) as error:
		resolve_config(write(tmp_path, 'run.cfg', 'bogus = 1\n'))
	assert error.value.kwargs['field'] == 'bogus'
	assert error.value.EXIT_CODE == 2


def test_key_value_file(tmp_path):
	text = '# small run\ntiles = 8\n\nuse_dam = false\nlr_preset = full\n'
	run_config = resolve_config(write(tmp_path, 'run.cfg', text))
	assert run_config['tiles'] == 8
	assert run_config['use_dam'] is False
	assert run_config['lr_preset'] == 'full'
	assert train_config(run_config).stage1_lrs == (1e-6, 1e-6, 1e-7)


def test_parse_key_values():
	assert parse_key_values('') == {}
	assert parse_key_values('a = 1.5\nb = [1, 2]\n') == {'a': 1.5, 'b': [1, 2]}


def test_malformed_line(tmp_path):
	with pytest.raises(ConfigError) as error:
		resolve_config(write(tmp_path, 'run.cfg', 'tiles = 8\njust words\n'))
	assert error.value.kwargs['field'].endswith(':2')


def test_hjson_file(tmp_path):
	text = '{\n\t# tiny\n\ttile_size: 32\n\tstage1_epochs: [1, 2, 3]\n}\n'
	run_config = resolve_config(write(tmp_path, 'run.hjson', text))
	assert run_config['tile_size'] == 32
	assert train_config(run_config).stage1_epochs == (1, 2, 3)


def test_hjson_must_be_mapping(tmp_path):
	with pytest.raises(ConfigError):
		resolve_config(write(tmp_path, 'run.json', '[1, 2]'))


def test_missing_file(tmp_path):
	with pytest.raises(MissingDataError):
		resolve_config(str(tmp_path / 'absent.cfg'))


@pytest.mark.parametrize('overrides, field', [
	({'tile_size': 60}, 'tile_size'),
	({'spatial_kernel': 4}, 'spatial_kernel'),
	({'val_fraction': 0.5, 'test_fraction': 0.5}, 'test_fraction'),
	({'stage2_epochs': [1]}, 'stage2_epochs'),
	({'edge_thresh_px': 0.0}, 'edge_thresh_px'),
	({'loss': 'l1'}, 'loss'),
])
def test_invalid_values(overrides, field):
	with pytest.raises(ConfigError) as error:
		resolve_config(overrides=overrides)
	assert error.value.kwargs['field'] == field
	assert field in error.value.source
	assert type(error.value) is ConfigError


def test_overrides_win_and_none_is_ignored(tmp_path):
	path = write(tmp_path, 'run.cfg', 'tiles = 8\nseed = 3\n')
	run_config = resolve_config(path, {'tiles': 12, 'seed': None})
	assert run_config['tiles'] == 12
	assert run_config['seed'] == 3
	assert synth_config(run_config).seed == 3


def test_config_hash():
	first, second = resolve_config(), resolve_config()
	assert config_hash(first) == config_hash(second)
	assert len(config_hash(first)) == 64
	assert config_hash(resolve_config(overrides={'seed': 1})) != config_hash(first)
	assert train_config(first).config_hash == config_hash(first)
