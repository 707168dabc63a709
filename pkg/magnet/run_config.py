"""
Run configuration: defaults from config/config.hjson, then an optional user
file, then explicit command options. The result is validated as a whole.
"""
import hashlib
import json
import logging
import os

import hjson
from marshmallow import ValidationError

from config import config as defaults
from magnet.data.synth import SynthConfig
from magnet.errors import ConfigError, MissingDataError
from magnet.models.mdunet import UNetConfig
from magnet.training.trainer import TrainConfig
from magnet.validation.schema import RunConfigSchema

logger = logging.getLogger(__name__)

STRUCTURED_SUFFIXES = ('.hjson', '.json')


def parse_key_values(text, path='<text>'):
	"""Flat `key = value` lines; values use hjson scalar syntax, `#` starts a comment line."""
	lines = []
	for number, raw in enumerate(text.splitlines(), 1):
		line = raw.strip()
		if not line or line.startswith('#'):
			continue
		key, sep, value = line.partition('=')
		if not sep or not key.strip():
			raise ConfigError(field='{}:{}'.format(path, number), message='expected key = value, got {!r}'.format(line))
		lines.append('{}: {}'.format(key.strip(), value.strip()))
	if not lines:
		return {}
	try:
		return dict(hjson.loads('\n'.join(lines)))
	except hjson.HjsonDecodeError as error:
		raise ConfigError(field=path, message=str(error))


def read_config_file(path):
	if not os.path.isfile(path):
		raise MissingDataError(object='Config file', path=path)
	with open(path, encoding='utf-8') as file:
		text = file.read()
	if path.endswith(STRUCTURED_SUFFIXES):
		try:
			data = hjson.loads(text)
		except hjson.HjsonDecodeError as error:
			raise ConfigError(field=path, message=str(error))
		if not isinstance(data, dict):
			raise ConfigError(field=path, message='top level must be a mapping')
		return dict(data)
	return parse_key_values(text, path)


def resolve_config(path=None, overrides=None):
	merged = dict(defaults)
	if path:
		merged.update(read_config_file(path))
	merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
	try:
		return RunConfigSchema().load(merged)
	except ValidationError as error:
		field = sorted(error.messages)[0]
		raise ConfigError(source=error.messages, field=field, message=error.messages[field])


def config_hash(run_config):
	canonical = json.dumps(run_config, sort_keys=True, default=list)
	return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def synth_config(run_config):
	return SynthConfig(
		tiles=run_config['tiles'],
		tile_size=run_config['tile_size'],
		n_layers=run_config['n_layers'],
		pin_rate=run_config['pin_rate'],
		obstacle_rate=run_config['obstacle_rate'],
		macro_rate=run_config['macro_rate'],
		seed=run_config['seed'],
	)


def unet_config(run_config, tile_size=None):
	return UNetConfig(
		tile_size=tile_size or run_config['tile_size'],
		base_filters=run_config['base_filters'],
		reduction=run_config['reduction'],
		spatial_kernel=run_config['spatial_kernel'],
		use_mscm=run_config['use_mscm'],
		use_dam=run_config['use_dam'],
		seed=run_config['seed'],
	)


def train_config(run_config):
	return TrainConfig(
		epoch_divisor=run_config['epoch_divisor'],
		stage1_epochs=run_config.get('stage1_epochs'),
		stage2_epochs=run_config['stage2_epochs'],
		lr_preset=run_config['lr_preset'],
		stage1_lrs=run_config.get('stage1_lrs'),
		stage2_lrs=run_config.get('stage2_lrs'),
		amplification=run_config['amplification'],
		batch_size=run_config['batch_size'],
		loss=run_config['loss'],
		bce_weight=run_config['bce_weight'],
		seed=run_config['seed'],
		config_hash=config_hash(run_config),
	)
