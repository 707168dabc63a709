import math

import numpy as np
import pytest

from magnet.data.layout import Dataset, split_dataset
from magnet.data.synth import SynthConfig, synth_generate
from magnet.errors import ConfigError, DataError, DivergenceError
from magnet.graph.builder import build_tile_graph
from magnet.models.fusion import compare_models
from magnet.models.mdunet import UNetConfig
from magnet.tensor import ops
from magnet.training import trainer
from magnet.training.trainer import TrainConfig, TrainingHistory, stage1_pretrain, stage2_joint


def one_tile(dataset):
	return Dataset(dataset.tiles[:1], dataset.meta)


def empty(dataset):
	return Dataset([], dataset.meta)


def graphs_for(dataset):
	return [build_tile_graph(tile, 8.0) for tile in dataset]


# - Configuration -

def test_default_schedule():
	config = TrainConfig()
	assert config.stage1_epochs == (2, 38, 62)
	assert config.stage1_lrs == (2e-3, 1e-3, 1e-4)
	assert TrainConfig(lr_preset='full').stage2_lrs == (1e-6, 1e-7)


@pytest.mark.parametrize('kwargs', [
	{'lr_preset': 'fast'},
	{'stage1_epochs': (1, 1)},
	{'stage2_epochs': (1, -1)},
	{'amplification': 0.0},
	{'batch_size': 0},
	{'loss': 'l1'},
	{'stage1_lrs': (1e-3, 0.0, 1e-4)},
])
def test_invalid_train_config(kwargs):
	with pytest.raises(ConfigError):
		TrainConfig(**kwargs)


# - Stage 1 -

def test_amplified_phase_sees_scaled_labels(monkeypatch, micro_config, micro_dataset):
	seen = []
	original = trainer.compute_loss

	def recording(pred, label, config):
		seen.append(np.array(label))
		return original(pred, label, config)

	monkeypatch.setattr(trainer, 'compute_loss', recording)
	config = TrainConfig(stage1_epochs=(1, 1, 0), batch_size=1)
	stage1_pretrain(one_tile(micro_dataset), empty(micro_dataset), micro_config, config)
	assert len(seen) == 2
	assert np.any(seen[1])
	assert np.array_equal(seen[0], seen[1] * 10.0)


def test_learning_rate_changes_twice(micro_config, micro_dataset):
	history = TrainingHistory()
	stage1_pretrain(one_tile(micro_dataset), empty(micro_dataset), micro_config, TrainConfig(stage1_epochs=(1, 1, 1)), history)
	assert [row['phase'] for row in history.rows] == ['amplified', 'base', 'finetune']
	assert [row['lr'] for row in history.rows] == [2e-3, 1e-3, 1e-4]
	assert history.lr_changes() == 2
	assert math.isnan(history.last('val_loss'))


def test_stage1_checkpoint(micro_config, micro_dataset):
	unet, checkpoint = stage1_pretrain(one_tile(micro_dataset), empty(micro_dataset), micro_config, TrainConfig(stage1_epochs=(1, 0, 0)))
	assert checkpoint.stage == 1
	assert checkpoint.epoch == 1
	assert set(checkpoint.params) == {'unet.' + name for name, _ in unet.named_parameters()}
	assert checkpoint.model_config['base_filters'] == 2


def test_stage1_is_deterministic(micro_config, micro_dataset):
	config = TrainConfig(stage1_epochs=(1, 1, 0), batch_size=2)
	train = Dataset(micro_dataset.tiles[:3], micro_dataset.meta)
	_, first = stage1_pretrain(train, empty(micro_dataset), micro_config, config)
	_, second = stage1_pretrain(train, empty(micro_dataset), micro_config, config)
	for name, array in first.params.items():
		assert second.params[name].tobytes() == array.tobytes()


def test_divergence_is_reported(monkeypatch, micro_config, micro_dataset):
	monkeypatch.setattr(trainer, 'compute_loss', lambda pred, label, config: ops.mse_loss(pred, label) * float('nan'))
	with pytest.raises(DivergenceError) as error:
		stage1_pretrain(one_tile(micro_dataset), empty(micro_dataset), micro_config, TrainConfig(stage1_epochs=(1, 0, 0)))
	assert error.value.kwargs['phase'] == 'amplified'
	assert error.value.EXIT_CODE == 4


def test_empty_training_set(micro_config, micro_dataset):
	with pytest.raises(DataError):
		stage1_pretrain(empty(micro_dataset), empty(micro_dataset), micro_config, TrainConfig())


def test_bce_loss_variant(micro_config, micro_dataset):
	history = TrainingHistory()
	config = TrainConfig(stage1_epochs=(0, 1, 0), loss='mse+bce')
	stage1_pretrain(one_tile(micro_dataset), one_tile(micro_dataset), micro_config, config, history)
	assert math.isfinite(history.last('train_loss'))
	assert math.isfinite(history.last('val_loss'))


# - Stage 2 -

def test_unet_frozen_then_trained(micro_config, micro_dataset):
	train = one_tile(micro_dataset)
	_, checkpoint = stage1_pretrain(train, empty(micro_dataset), micro_config, TrainConfig(stage1_epochs=(1, 0, 0)))
	before = {name: array.tobytes() for name, array in checkpoint.params.items()}
	snapshots = []

	def on_step(model, phase):
		snapshots.append((phase, {name: param.data.tobytes() for name, param in model.named_parameters() if name.startswith('unet.')}))

	config = TrainConfig(stage2_epochs=(1, 1))
	model, joint = stage2_joint(train, graphs_for(train), empty(micro_dataset), [], checkpoint, micro_config, config, on_step=on_step)
	assert [phase for phase, _ in snapshots] == ['frozen', 'joint']
	assert snapshots[0][1] == before
	assert snapshots[1][1] != before
	assert joint.stage == 2
	assert not any(param.frozen for param in model.parameters())


def test_stage2_needs_one_graph_per_tile(micro_config, micro_dataset):
	train = one_tile(micro_dataset)
	_, checkpoint = stage1_pretrain(train, empty(micro_dataset), micro_config, TrainConfig(stage1_epochs=(1, 0, 0)))
	with pytest.raises(DataError):
		stage2_joint(train, [], empty(micro_dataset), [], checkpoint, micro_config, TrainConfig())


# - History -

def test_history_csv(tmp_path):
	path = tmp_path / 'history.csv'
	history = TrainingHistory(path)
	history.record(1, 'amplified', 2e-3, 0.5, 0.25)
	history.record(2, 'base', 1e-3, 0.4, 0.2)
	reopened = TrainingHistory(path)
	reopened.record(3, 'finetune', 1e-4, 0.3, 0.1)
	lines = path.read_text(encoding='utf-8').splitlines()
	assert lines[0] == 'epoch,phase,lr,train_loss,val_loss'
	assert len(lines) == 4
	assert lines[1] == '1,amplified,0.002,0.5,0.25'
	assert history.lr_changes() == 1
	assert history.last('epoch') == 2


def test_empty_history():
	history = TrainingHistory()
	assert history.last('val_loss') is None
	assert history.lr_changes() == 0


# - Trends -

TREND_SEEDS = (0, 1, 2)


def held(results, predicate):
	return sum(1 for result in results if predicate(result)) >= 2


def trend_run(seed):
	dataset = synth_generate(SynthConfig(tiles=16, tile_size=16, pin_rate=24.0, seed=seed))
	train, val, test = split_dataset(dataset, 0.125, 0.25)
	unet_config = UNetConfig(tile_size=16, base_filters=4, seed=seed)
	config = TrainConfig(stage1_epochs=(2, 16, 4), stage2_epochs=(2, 4), batch_size=2, seed=seed)
	stage1, stage2 = TrainingHistory(), TrainingHistory()
	unet, checkpoint = stage1_pretrain(train, val, unet_config, config, stage1)
	model, joint = stage2_joint(train, graphs_for(train), val, graphs_for(val), checkpoint, unet_config, config, stage2)
	return {
		'stage1': stage1,
		'stage2': stage2,
		'joint': joint,
		'comparison': compare_models(unet, model, test, graphs_for(test)),
	}


@pytest.fixture(scope='module')
def trend_runs():
	return [trend_run(seed) for seed in TREND_SEEDS]


@pytest.mark.slow
def test_stage1_loss_halves(trend_runs):
	for run in trend_runs:
		assert all(math.isfinite(row['val_loss']) for row in run['stage1'].rows)
	assert held(trend_runs, lambda run: run['stage1'].last('train_loss') < 0.5 * run['stage1'].rows[0]['train_loss'])


@pytest.mark.slow
def test_joint_validation_below_stage1(trend_runs):
	assert held(trend_runs, lambda run: run['stage2'].last('val_loss') < run['stage1'].last('val_loss'))


@pytest.mark.slow
def test_fusion_lowers_false_positives(trend_runs):
	assert held(trend_runs, lambda run: run['comparison'].fpr_delta <= 0 and run['comparison'].tpr_delta > -0.05)


@pytest.mark.slow
def test_joint_training_is_deterministic(trend_runs):
	again = trend_run(TREND_SEEDS[0])['joint']
	first = trend_runs[0]['joint']
	assert list(again.params) == list(first.params)
	for name, array in first.params.items():
		assert again.params[name].tobytes() == array.tobytes()
