import struct

import numpy as np
import pytest

from magnet.errors import CheckpointCorruptError, CheckpointMismatchError, MissingDataError
from magnet.models.fusion import MagNet
from magnet.models.mdunet import MDUnet, UNetConfig
from magnet.tensor.core import no_grad
from magnet.training.checkpoint import (
	MAGIC, VERSION, Checkpoint, apply_checkpoint, checkpoint_from_module, load_checkpoint, read_checkpoint_bytes, save_checkpoint,
)
from magnet.training.trainer import build_joint_model, restore_magnet, restore_unet


def stage1_checkpoint(config):
	unet = MDUnet(config)
	return unet, checkpoint_from_module(unet, 1, epoch=3, model_config=config.to_dict(), prefix='unet')


def saved(tmp_path, checkpoint):
	path = tmp_path / 'model.ckpt'
	save_checkpoint(checkpoint, path)
	return path


def test_round_trip_restores_identical_forward(tmp_path, micro_config, micro_dataset):
	unet, checkpoint = stage1_checkpoint(micro_config)
	loaded = load_checkpoint(saved(tmp_path, checkpoint))
	assert loaded.stage == 1
	assert loaded.epoch == 3
	assert list(loaded.params) == list(checkpoint.params)
	for name, array in checkpoint.params.items():
		assert loaded.params[name].tobytes() == array.tobytes()

	restored = restore_unet(loaded, UNetConfig(tile_size=16, base_filters=2, seed=7))
	features = micro_dataset.tiles[0].features
	with no_grad():
		assert restored(features).data.tobytes() == unet(features).data.tobytes()


def test_names_carry_prefix(micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	assert all(name.startswith('unet.') for name in checkpoint.params)


def test_header_layout(tmp_path, micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	buffer = saved(tmp_path, checkpoint).read_bytes()
	magic, version, header_len = struct.unpack_from('<4sIQ', buffer)
	assert magic == MAGIC
	assert version == VERSION
	payload = len(buffer) - 16 - header_len
	assert payload == 8 * sum(array.size for array in checkpoint.params.values())


def test_truncated_file(tmp_path, micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	buffer = saved(tmp_path, checkpoint).read_bytes()
	for cut in (3, 20, len(buffer) - 8):
		with pytest.raises(CheckpointCorruptError):
			read_checkpoint_bytes(buffer[:cut])


def test_bad_magic_and_version(tmp_path, micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	buffer = saved(tmp_path, checkpoint).read_bytes()
	with pytest.raises(CheckpointCorruptError):
		read_checkpoint_bytes(b'XXXX' + buffer[4:])
	with pytest.raises(CheckpointCorruptError):
		read_checkpoint_bytes(buffer[:4] + struct.pack('<I', VERSION + 1) + buffer[8:])


def test_garbage_manifest():
	header = b'{not json'
	with pytest.raises(CheckpointCorruptError) as error:
		read_checkpoint_bytes(struct.pack('<4sIQ', MAGIC, VERSION, len(header)) + header)
	assert error.value.EXIT_CODE == 3


def test_missing_file(tmp_path):
	with pytest.raises(MissingDataError):
		load_checkpoint(tmp_path / 'absent.ckpt')


def test_joint_model_maps_only_unet(micro_config):
	unet, checkpoint = stage1_checkpoint(micro_config)
	model = build_joint_model(micro_config, checkpoint)
	for name, param in model.named_parameters():
		if name.startswith('unet.'):
			assert np.array_equal(param.data, checkpoint.params[name])
		else:
			assert name not in checkpoint.params


def test_base_filters_mismatch(micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	with pytest.raises(CheckpointMismatchError) as error:
		build_joint_model(UNetConfig(tile_size=16, base_filters=4), checkpoint)
	assert error.value.kwargs['field'] == 'base_filters'
	assert error.value.EXIT_CODE == 2


def test_stage_mismatch(micro_config):
	_, checkpoint = stage1_checkpoint(micro_config)
	with pytest.raises(CheckpointMismatchError):
		restore_magnet(checkpoint, micro_config)
	with pytest.raises(CheckpointMismatchError):
		build_joint_model(micro_config, Checkpoint(checkpoint.params, stage=2))


def test_unknown_tensor_rejected(micro_config):
	unet = MDUnet(micro_config)
	checkpoint = Checkpoint({'unet.nope': np.zeros(3)}, stage=1)
	with pytest.raises(CheckpointMismatchError):
		apply_checkpoint(unet, checkpoint, source_prefix='unet.', strict=False)


def test_shape_mismatch_rejected(micro_config):
	unet = MDUnet(micro_config)
	checkpoint = Checkpoint({'unet.head.bias': np.zeros(2)}, stage=1)
	with pytest.raises(CheckpointMismatchError):
		apply_checkpoint(unet, checkpoint, source_prefix='unet.', strict=False)


def test_strict_requires_every_tensor(micro_config):
	unet, checkpoint = stage1_checkpoint(micro_config)
	partial = Checkpoint(dict(list(checkpoint.params.items())[:-1]), stage=1)
	with pytest.raises(CheckpointMismatchError):
		apply_checkpoint(MDUnet(micro_config), partial, source_prefix='unet.')
	loaded = apply_checkpoint(MDUnet(micro_config), partial, source_prefix='unet.', strict=False)
	assert len(loaded) == len(checkpoint.params) - 1


def test_full_model_round_trip(tmp_path, micro_config):
	model = MagNet(micro_config)
	checkpoint = checkpoint_from_module(model, 2, model_config=micro_config.to_dict())
	restored = restore_magnet(load_checkpoint(saved(tmp_path, checkpoint)), micro_config)
	for (name, param), (other, restored_param) in zip(model.named_parameters(), restored.named_parameters()):
		assert name == other
		assert param.data.tobytes() == restored_param.data.tobytes()
