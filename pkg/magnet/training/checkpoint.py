"""
Checkpoint container.

Layout: b'MAGN', u32 format version, u64 manifest length (both little
endian), the UTF-8 JSON manifest, then every parameter as little-endian
float64 in manifest order.
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from marshmallow import ValidationError

from magnet.errors import CheckpointCorruptError, CheckpointMismatchError, MissingDataError
from magnet.schemas import CheckpointManifestSchema

logger = logging.getLogger(__name__)

MAGIC = b'MAGN'
VERSION = 1
_PREAMBLE = struct.Struct('<4sIQ')


@dataclass
class Checkpoint:
	params: Dict[str, np.ndarray]
	stage: int
	epoch: int = 0
	config_hash: str = ''
	model_config: dict = field(default_factory=dict)
	rng_state: dict = field(default_factory=dict)


def checkpoint_from_module(module, stage, epoch=0, config_hash='', model_config=None, rng_state=None, prefix=''):
	return Checkpoint(module.state(prefix), stage, epoch, config_hash, dict(model_config or {}), dict(rng_state or {}))


def save_checkpoint(checkpoint, path):
	entries, chunks, offset = [], [], 0
	for name, array in checkpoint.params.items():
		payload = np.ascontiguousarray(array, dtype='<f8').tobytes()
		entries.append({'name': name, 'shape': list(np.shape(array)), 'offset': offset, 'nbytes': len(payload)})
		chunks.append(payload)
		offset += len(payload)

	manifest = CheckpointManifestSchema().dump({
		'version': VERSION,
		'stage': checkpoint.stage,
		'epoch': checkpoint.epoch,
		'config_hash': checkpoint.config_hash,
		'model_config': checkpoint.model_config,
		'rng_state': checkpoint.rng_state,
		'params': entries,
		'payload_bytes': offset,
	})
	header = json.dumps(manifest, sort_keys=True).encode('utf-8')
	with open(path, 'wb') as file:
		file.write(_PREAMBLE.pack(MAGIC, VERSION, len(header)))
		file.write(header)
		for chunk in chunks:
			file.write(chunk)
	logger.info('Saved stage-%s checkpoint (%s tensors, epoch %s) to %s', checkpoint.stage, len(entries), checkpoint.epoch, path)


def read_checkpoint_bytes(buffer, path='<bytes>'):
	if len(buffer) < _PREAMBLE.size:
		raise CheckpointCorruptError(path=path, message='truncated preamble')
	magic, version, header_len = _PREAMBLE.unpack_from(buffer)
	if magic != MAGIC:
		raise CheckpointCorruptError(path=path, message='bad magic {!r}'.format(magic))
	if version != VERSION:
		raise CheckpointCorruptError(path=path, message='unsupported version {}'.format(version))
	start = _PREAMBLE.size
	if len(buffer) < start + header_len:
		raise CheckpointCorruptError(path=path, message='truncated manifest')
	try:
		manifest = CheckpointManifestSchema().load(json.loads(buffer[start:start + header_len].decode('utf-8')))
	except (ValidationError, ValueError) as error:
		raise CheckpointCorruptError(source=getattr(error, 'messages', None), path=path, message='invalid manifest')

	payload = buffer[start + header_len:]
	if len(payload) != manifest['payload_bytes']:
		raise CheckpointCorruptError(
			path=path, message='payload is {} bytes, manifest says {}'.format(len(payload), manifest['payload_bytes']),
		)
	params = {}
	for entry in manifest['params']:
		count = int(np.prod(entry['shape'], dtype=np.int64))
		end = entry['offset'] + entry['nbytes']
		if entry['nbytes'] != 8 * count or end > len(payload):
			raise CheckpointCorruptError(path=path, message='entry {} out of bounds'.format(entry['name']))
		data = np.frombuffer(payload, dtype='<f8', count=count, offset=entry['offset'])
		params[entry['name']] = data.astype(np.float64).reshape(entry['shape'])

	return Checkpoint(
		params, manifest['stage'], manifest['epoch'], manifest['config_hash'],
		manifest['model_config'], manifest['rng_state'],
	)


def load_checkpoint(path):
	try:
		with open(path, 'rb') as file:
			buffer = file.read()
	except FileNotFoundError:
		raise MissingDataError(object='checkpoint', path=path)
	return read_checkpoint_bytes(buffer, str(path))


def check_model_config(checkpoint, model_config, keys=None):
	"""Raises CheckpointMismatchError naming the first differing config field."""
	for key in sorted(keys or model_config):
		if key in checkpoint.model_config and checkpoint.model_config[key] != model_config[key]:
			raise CheckpointMismatchError(field=key, found=checkpoint.model_config[key], expected=model_config[key])


def apply_checkpoint(module, checkpoint, source_prefix='', target_prefix='', strict=True):
	"""
	Copies checkpoint tensors into the module's parameters.

	Names are matched after swapping `source_prefix` for `target_prefix`.
	Returns the list of parameter names that were loaded. With `strict`,
	every module parameter under `target_prefix` must be present.
	"""
	params = dict(module.named_parameters())
	loaded = []
	for name, array in checkpoint.params.items():
		if source_prefix and not name.startswith(source_prefix):
			continue
		target = target_prefix + name[len(source_prefix):]
		if target not in params:
			raise CheckpointMismatchError(field=name, found='present', expected='no such parameter')
		param = params[target]
		if param.shape != array.shape:
			raise CheckpointMismatchError(field=target, found=list(array.shape), expected=list(param.shape))
		param.data[...] = array
		loaded.append(target)

	if strict:
		missing = [name for name in params if name.startswith(target_prefix) and name not in loaded]
		if missing:
			raise CheckpointMismatchError(field=missing[0], found='missing', expected='present')
	logger.debug('Loaded %s of %s parameters', len(loaded), len(params))
	return loaded
