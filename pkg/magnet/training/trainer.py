import csv
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from magnet.data.layout import amplify_labels, binarize_truth
from magnet.errors import CheckpointMismatchError, ConfigError, DataError, DivergenceError
from magnet.models.fusion import MagNet, forward_maps
from magnet.models.mdunet import MDUnet
from magnet.tensor import ops
from magnet.tensor.core import backward, no_grad
from magnet.tensor.optim import Adam
from magnet.training.checkpoint import apply_checkpoint, check_model_config, checkpoint_from_module

logger = logging.getLogger(__name__)

UNET_PREFIX = 'unet.'
FULL_PHASE_EPOCHS = (10, 190, 310)
LR_PRESETS = {
	'desk': {'stage1': (2e-3, 1e-3, 1e-4), 'stage2': (1e-3, 1e-4)},
	'full': {'stage1': (1e-6, 1e-6, 1e-7), 'stage2': (1e-6, 1e-7)},
}
STAGE1_PHASES = ('amplified', 'base', 'finetune')
STAGE2_PHASES = ('frozen', 'joint')
LOSSES = ('mse', 'mse+bce')


@dataclass
class TrainConfig:
	epoch_divisor: int = 5
	stage1_epochs: Tuple[int, ...] = None
	stage2_epochs: Tuple[int, int] = (4, 8)
	lr_preset: str = 'desk'
	stage1_lrs: Tuple[float, ...] = None
	stage2_lrs: Tuple[float, float] = None
	amplification: float = 10.0
	batch_size: int = 4
	loss: str = 'mse'
	bce_weight: float = 0.1
	seed: int = 0
	config_hash: str = ''

	def __post_init__(self):
		if self.lr_preset not in LR_PRESETS:
			raise ConfigError(field='lr_preset', message='must be one of {}'.format(sorted(LR_PRESETS)))
		if self.epoch_divisor < 1:
			raise ConfigError(field='epoch_divisor', message='must be >= 1')
		if self.stage1_epochs is None:
			self.stage1_epochs = tuple(max(1, round(epochs / self.epoch_divisor)) for epochs in FULL_PHASE_EPOCHS)
		if self.stage1_lrs is None:
			self.stage1_lrs = LR_PRESETS[self.lr_preset]['stage1']
		if self.stage2_lrs is None:
			self.stage2_lrs = LR_PRESETS[self.lr_preset]['stage2']
		self.stage1_epochs = tuple(self.stage1_epochs)
		self.stage2_epochs = tuple(self.stage2_epochs)
		self.stage1_lrs = tuple(self.stage1_lrs)
		self.stage2_lrs = tuple(self.stage2_lrs)
		self.validate()

	def validate(self):
		if len(self.stage1_epochs) != 3 or len(self.stage1_lrs) != 3:
			raise ConfigError(field='stage1_epochs', message='stage 1 has exactly three phases')
		if len(self.stage2_epochs) != 2 or len(self.stage2_lrs) != 2:
			raise ConfigError(field='stage2_epochs', message='stage 2 has exactly two phases')
		if any(epochs < 0 for epochs in self.stage1_epochs + self.stage2_epochs):
			raise ConfigError(field='stage1_epochs', message='epoch counts must be non-negative')
		if any(lr <= 0 for lr in self.stage1_lrs + self.stage2_lrs):
			raise ConfigError(field='stage1_lrs', message='learning rates must be positive')
		if self.amplification <= 0:
			raise ConfigError(field='amplification', message='must be positive')
		if self.batch_size < 1:
			raise ConfigError(field='batch_size', message='must be >= 1')
		if self.loss not in LOSSES:
			raise ConfigError(field='loss', message='must be one of {}'.format(LOSSES))


class TrainingHistory:
	"""Epoch rows kept in memory and, when a path is given, appended to a CSV file."""

	FIELDS = ('epoch', 'phase', 'lr', 'train_loss', 'val_loss')

	def __init__(self, path=None):
		self.path = path
		self.rows = []
		if path is not None:
			with open(path, 'a', newline='', encoding='utf-8') as file:
				if file.tell() == 0:
					csv.writer(file).writerow(self.FIELDS)

	def record(self, epoch, phase, lr, train_loss, val_loss):
		row = (epoch, phase, lr, train_loss, val_loss)
		self.rows.append(dict(zip(self.FIELDS, row)))
		logger.info('Epoch %s [%s] lr=%g train=%.6g val=%.6g', epoch, phase, lr, train_loss, val_loss)
		if self.path is not None:
			with open(self.path, 'a', newline='', encoding='utf-8') as file:
				csv.writer(file).writerow([epoch, phase, repr(lr), repr(train_loss), repr(val_loss)])

	def last(self, key):
		return self.rows[-1][key] if self.rows else None

	def lr_changes(self):
		lrs = [row['lr'] for row in self.rows]
		return sum(1 for previous, current in zip(lrs, lrs[1:]) if previous != current)


def compute_loss(pred, label, config):
	loss = ops.mse_loss(pred, label)
	if config.loss == 'mse+bce':
		loss = loss + ops.bce_loss(pred, binarize_truth(label)) * config.bce_weight
	return loss


def _guard(loss, epoch, phase):
	value = loss.item()
	if not math.isfinite(value):
		raise DivergenceError(loss=value, epoch=epoch, phase=phase)
	return value


def _batches(order, size):
	return [order[start:start + size] for start in range(0, len(order), size)]


def unet_validation_loss(unet, val_set):
	if not len(val_set):
		return float('nan')
	with no_grad():
		losses = [ops.mse_loss(unet(tile.features), tile.label).item() for tile in val_set]
	return float(np.mean(losses))


def joint_validation_loss(model, val_set, val_graphs):
	if not len(val_set):
		return float('nan')
	with no_grad():
		losses = [
			ops.mse_loss(forward_maps(model, tile.features, graph)[2], tile.label).item()
			for tile, graph in zip(val_set, val_graphs)
		]
	return float(np.mean(losses))


def stage1_pretrain(train_set, val_set, unet_config, config, history=None):
	"""
	Trains MD-Unet alone in three phases. Phase 1 fits labels amplified by
	`config.amplification`; phases 2 and 3 fit the original labels. Gradients
	of a batch are averaged before each Adam step.

	Returns (model, checkpoint); checkpoint names carry the `unet.` prefix.
	"""
	if not len(train_set):
		raise DataError(message='stage 1 needs a non-empty training set')
	history = history or TrainingHistory()
	unet = MDUnet(unet_config)
	optimizer = Adam(unet.parameters(), lr=config.stage1_lrs[0])
	rng = np.random.default_rng([config.seed, 2])
	tiles = train_set.tiles

	epoch = 0
	for phase, n_epochs, lr in zip(STAGE1_PHASES, config.stage1_epochs, config.stage1_lrs):
		optimizer.set_lr(lr)
		amplify = phase == STAGE1_PHASES[0]
		for _ in range(n_epochs):
			epoch += 1
			losses = []
			for batch in _batches(rng.permutation(len(tiles)), config.batch_size):
				optimizer.zero_grad()
				for index in batch:
					tile = amplify_labels(tiles[index], config.amplification) if amplify else tiles[index]
					loss = compute_loss(unet(tile.features), tile.label, config)
					losses.append(_guard(loss, epoch, phase))
					backward(loss * (1.0 / len(batch)))
				optimizer.step()
			history.record(epoch, phase, lr, float(np.mean(losses)), unet_validation_loss(unet, val_set))

	checkpoint = checkpoint_from_module(
		unet, stage=1, epoch=epoch, config_hash=config.config_hash,
		model_config=unet_config.to_dict(), rng_state=rng.bit_generator.state, prefix=UNET_PREFIX.rstrip('.'),
	)
	return unet, checkpoint


def build_joint_model(unet_config, unet_checkpoint):
	"""New joint model with the stage-1 MD-Unet weights; everything else freshly initialized."""
	if unet_checkpoint.stage != 1:
		raise CheckpointMismatchError(field='stage', found=unet_checkpoint.stage, expected=1)
	check_model_config(unet_checkpoint, unet_config.to_dict(), keys=[key for key in unet_config.to_dict() if key != 'seed'])
	model = MagNet(unet_config)
	loaded = apply_checkpoint(model, unet_checkpoint, source_prefix=UNET_PREFIX, target_prefix=UNET_PREFIX)
	logger.info('Mapped %s MD-Unet tensors from the stage-1 checkpoint', len(loaded))
	return model


def stage2_joint(train_set, train_graphs, val_set, val_graphs, unet_checkpoint, unet_config, config, history=None, on_step=None):
	"""
	Joint training with batch size 1 and original labels. In the first phase
	the MD-Unet parameters are frozen; in the second everything trains.

	`on_step(model, phase)` runs after every optimizer step.
	"""
	if not len(train_set):
		raise DataError(message='stage 2 needs a non-empty training set')
	if len(train_graphs) != len(train_set) or len(val_graphs) != len(val_set):
		raise DataError(message='one graph per tile is required')
	if config.batch_size != 1:
		logger.info('Stage 2 trains with batch size 1 (configured %s)', config.batch_size)
	history = history or TrainingHistory()
	model = build_joint_model(unet_config, unet_checkpoint)
	optimizer = Adam(model.parameters(), lr=config.stage2_lrs[0])
	rng = np.random.default_rng([config.seed, 3])
	tiles = train_set.tiles

	epoch = 0
	for phase, n_epochs, lr in zip(STAGE2_PHASES, config.stage2_epochs, config.stage2_lrs):
		frozen = phase == STAGE2_PHASES[0]
		model.unet.freeze(frozen)
		logger.info('MD-Unet parameters %s', 'frozen' if frozen else 'trainable')
		optimizer.set_lr(lr)
		for _ in range(n_epochs):
			epoch += 1
			losses = []
			for index in rng.permutation(len(tiles)):
				optimizer.zero_grad()
				tile = tiles[index]
				_, _, prob = forward_maps(model, tile.features, train_graphs[index])
				loss = compute_loss(prob, tile.label, config)
				losses.append(_guard(loss, epoch, phase))
				backward(loss)
				optimizer.step()
				if on_step is not None:
					on_step(model, phase)
			history.record(epoch, phase, lr, float(np.mean(losses)), joint_validation_loss(model, val_set, val_graphs))
	model.unet.freeze(False)

	checkpoint = checkpoint_from_module(
		model, stage=2, epoch=epoch, config_hash=config.config_hash,
		model_config=unet_config.to_dict(), rng_state=rng.bit_generator.state,
	)
	return model, checkpoint


def restore_unet(checkpoint, unet_config):
	"""MD-Unet from either stage's checkpoint."""
	check_model_config(checkpoint, unet_config.to_dict(), keys=[key for key in unet_config.to_dict() if key != 'seed'])
	unet = MDUnet(unet_config)
	apply_checkpoint(unet, checkpoint, source_prefix=UNET_PREFIX, strict=True)
	return unet


def restore_magnet(checkpoint, unet_config):
	if checkpoint.stage != 2:
		raise CheckpointMismatchError(field='stage', found=checkpoint.stage, expected=2)
	check_model_config(checkpoint, unet_config.to_dict(), keys=[key for key in unet_config.to_dict() if key != 'seed'])
	model = MagNet(unet_config)
	apply_checkpoint(model, checkpoint)
	return model
