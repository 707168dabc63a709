import logging
import os

import click

from magnet.cli.utils import output_lock, parallel_map, safe_command, setup_logging
from magnet.data.layout import split_dataset
from magnet.data.npy import load_npy, save_npy
from magnet.data.storage import MANIFEST_NAME, load_dataset, save_dataset, tile_stem
from magnet.data.synth import synth_generate
from magnet.errors import UsageError
from magnet.graph.builder import build_tile_graph, load_graph, save_graph
from magnet.graph.guidance import build_guidance_map
from magnet.metrics.report import evaluate, render_comparison, render_table, write_json
from magnet.models import checks  # noqa: F401  registers the network gradient checks
from magnet.models.fusion import compare_models, magnet_forward, unet_forward
from magnet.run_config import config_hash, resolve_config, synth_config, train_config, unet_config
from magnet.tensor.gradcheck import raise_on_failure, run_checks
from magnet.training.checkpoint import load_checkpoint, save_checkpoint
from magnet.training.trainer import TrainingHistory, restore_magnet, restore_unet, stage1_pretrain, stage2_joint

logger = logging.getLogger(__name__)

UNET_CHECKPOINT = 'unet.ckpt'
MAGNET_CHECKPOINT = 'magnet.ckpt'
GUIDANCE_FILE = 'guidance.npy'
PROVENANCE_FILE = 'guidance_provenance.npy'
SPLITS = click.Choice(['train', 'val', 'test'])

config_option = click.option(
	'--config', 'config_path', type=click.Path(dir_okay=False), default=None,
	help='hjson/json file or key = value lines overriding config/config.hjson',
)
threads_option = click.option('--threads', type=int, default=None, help='Worker threads for per-tile work')


def prepare(config_path, **overrides):
	run_config = resolve_config(config_path, overrides)
	setup_logging(run_config['log_level'])
	logger.info('Resolved config %s', config_hash(run_config))
	return run_config


def require_dataset(data_dir, split=None):
	if not os.path.isfile(os.path.join(data_dir, MANIFEST_NAME)):
		raise UsageError(message='no dataset manifest in {}'.format(data_dir))
	return load_dataset(data_dir, split)


def load_graphs(graphs_dir, dataset):
	if not os.path.isdir(graphs_dir):
		raise UsageError(message='graph directory {} does not exist'.format(graphs_dir))
	return [load_graph(os.path.join(graphs_dir, tile_stem(tile) + '.json')) for tile in dataset]


@click.group()
def cli():
	"""MD-Unet + tile GNN hotspot prediction."""


@cli.command('gen-data')
@click.option('--out', required=True, type=click.Path(file_okay=False), help='Dataset directory')
@click.option('--tiles', type=int, default=None)
@click.option('--size', type=int, default=None, help='Tile side in pixels, divisible by 16')
@click.option('--layers', type=int, default=None)
@click.option('--seed', type=int, default=None)
@config_option
@safe_command
def gen_data(out, tiles, size, layers, seed, config_path):
	run_config = prepare(config_path, tiles=tiles, tile_size=size, n_layers=layers, seed=seed)
	with output_lock(out):
		dataset = synth_generate(synth_config(run_config))
		splits = split_dataset(dataset, run_config['val_fraction'], run_config['test_fraction'])
		save_dataset(splits, out)


@cli.command('build-graphs')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.option('--edge-thresh-px', type=float, default=None)
@threads_option
@config_option
@safe_command
def build_graphs(data, out, edge_thresh_px, threads, config_path):
	run_config = prepare(config_path, edge_thresh_px=edge_thresh_px, threads=threads)
	dataset = require_dataset(data)
	thresh = run_config['edge_thresh_px']
	with output_lock(out):
		graphs = parallel_map(lambda tile: build_tile_graph(tile, thresh), dataset.tiles, run_config['threads'])
		for tile, graph in zip(dataset, graphs):
			save_graph(graph, os.path.join(out, tile_stem(tile) + '.json'))
		guidance = build_guidance_map(graphs, dataset.layout_dims)
		save_npy(guidance.grid, os.path.join(out, GUIDANCE_FILE))
		save_npy(guidance.provenance, os.path.join(out, PROVENANCE_FILE))
	empty = sum(1 for graph in graphs if graph.is_empty)
	logger.info('Built %s graphs (%s empty, %s edges)', len(graphs), empty, sum(len(graph.edges) for graph in graphs))


@cli.command('train-unet')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.option('--epoch-divisor', type=int, default=None)
@click.option('--amplification', type=float, default=None)
@config_option
@safe_command
def train_unet(data, out, epoch_divisor, amplification, config_path):
	run_config = prepare(config_path, epoch_divisor=epoch_divisor, amplification=amplification)
	train_set = require_dataset(data, 'train')
	val_set = load_dataset(data, 'val')
	with output_lock(out):
		history = TrainingHistory(os.path.join(out, 'stage1_log.csv'))
		_, checkpoint = stage1_pretrain(
			train_set, val_set, unet_config(run_config, train_set.meta.tile_size), train_config(run_config), history,
		)
		save_checkpoint(checkpoint, os.path.join(out, UNET_CHECKPOINT))


@cli.command('train-joint')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--graphs', 'graphs_dir', required=True, type=click.Path(file_okay=False))
@click.option('--unet-ckpt', required=True, type=click.Path(dir_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False))
@config_option
@safe_command
def train_joint(data, graphs_dir, unet_ckpt, out, config_path):
	run_config = prepare(config_path)
	train_set = require_dataset(data, 'train')
	val_set = load_dataset(data, 'val')
	train_graphs = load_graphs(graphs_dir, train_set)
	val_graphs = load_graphs(graphs_dir, val_set)
	checkpoint = load_checkpoint(unet_ckpt)
	with output_lock(out):
		history = TrainingHistory(os.path.join(out, 'stage2_log.csv'))
		_, joint = stage2_joint(
			train_set, train_graphs, val_set, val_graphs, checkpoint,
			unet_config(run_config, train_set.meta.tile_size), train_config(run_config), history,
		)
		save_checkpoint(joint, os.path.join(out, MAGNET_CHECKPOINT))


def write_prediction(out, tile, prediction):
	stem = os.path.join(out, tile_stem(tile))
	save_npy(prediction.density_map, stem + '_density.npy')
	save_npy(prediction.gnn_map, stem + '_gnn.npy')
	save_npy(prediction.prob_map, stem + '_prob.npy')
	save_npy(prediction.binary_map, stem + '_binary.npy')


@cli.command('predict')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--ckpt', required=True, type=click.Path(dir_okay=False), help='Stage-1 or stage-2 checkpoint')
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.option('--graphs', 'graphs_dir', type=click.Path(file_okay=False), default=None)
@click.option('--split', type=SPLITS, default='test')
@click.option('--threshold', type=float, default=None)
@threads_option
@config_option
@safe_command
def predict(data, ckpt, out, graphs_dir, split, threshold, threads, config_path):
	run_config = prepare(config_path, threshold=threshold, threads=threads)
	dataset = require_dataset(data, split)
	checkpoint = load_checkpoint(ckpt)
	config = unet_config(run_config, dataset.meta.tile_size)
	threshold = run_config['threshold']

	with output_lock(out):
		if checkpoint.stage == 1:
			unet = restore_unet(checkpoint, config)
			predictions = parallel_map(lambda tile: unet_forward(unet, tile, threshold), dataset.tiles, run_config['threads'])
		else:
			if graphs_dir is None:
				raise UsageError(message='--graphs is required for a stage-2 checkpoint')
			model = restore_magnet(checkpoint, config)
			graphs = load_graphs(graphs_dir, dataset)
			guidance = build_guidance_map(graphs, dataset.layout_dims)
			predictions = parallel_map(
				lambda pair: magnet_forward(model, pair[0], pair[1], guidance, threshold),
				list(zip(dataset.tiles, graphs)), run_config['threads'],
			)
			save_npy(guidance.grid, os.path.join(out, GUIDANCE_FILE))
		for tile, prediction in zip(dataset, predictions):
			write_prediction(out, tile, prediction)
	logger.info('Wrote predictions for %s %s tiles to %s', len(dataset), split, out)


@cli.command('eval')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--pred', required=True, type=click.Path(file_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.option('--split', type=SPLITS, default='test')
@click.option('--threshold', type=float, default=None)
@config_option
@safe_command
def eval_command(data, pred, out, split, threshold, config_path):
	run_config = prepare(config_path, threshold=threshold)
	dataset = require_dataset(data, split)
	predictions = [load_npy(os.path.join(pred, tile_stem(tile) + '_prob.npy')) for tile in dataset]
	report = evaluate(dataset, predictions, run_config['threshold'])
	with output_lock(out):
		write_json(report.to_dict(), os.path.join(out, 'report.json'))
		with open(os.path.join(out, 'report.txt'), 'w', encoding='utf-8') as file:
			file.write(render_table(report))
	click.echo(render_table(report), nl=False)


@cli.command('compare')
@click.option('--data', required=True, type=click.Path(file_okay=False))
@click.option('--graphs', 'graphs_dir', required=True, type=click.Path(file_okay=False))
@click.option('--unet-ckpt', required=True, type=click.Path(dir_okay=False))
@click.option('--magnet-ckpt', required=True, type=click.Path(dir_okay=False))
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.option('--split', type=SPLITS, default='test')
@click.option('--threshold', type=float, default=None)
@config_option
@safe_command
def compare(data, graphs_dir, unet_ckpt, magnet_ckpt, out, split, threshold, config_path):
	run_config = prepare(config_path, threshold=threshold)
	dataset = require_dataset(data, split)
	config = unet_config(run_config, dataset.meta.tile_size)
	unet = restore_unet(load_checkpoint(unet_ckpt), config)
	model = restore_magnet(load_checkpoint(magnet_ckpt), config)
	comparison = compare_models(unet, model, dataset, load_graphs(graphs_dir, dataset), run_config['threshold'])
	with output_lock(out):
		write_json(comparison.to_dict(), os.path.join(out, 'comparison.json'))
		with open(os.path.join(out, 'comparison.txt'), 'w', encoding='utf-8') as file:
			file.write(render_comparison(comparison))
	click.echo(render_comparison(comparison), nl=False)


@cli.command('gradcheck')
@click.option('--seeds', type=int, default=None, help='Number of seeds per check')
@click.option('--name', 'names', multiple=True, help='Restrict to these checks')
@config_option
@safe_command
def gradcheck(seeds, names, config_path):
	run_config = prepare(config_path, gradcheck_seeds=seeds)
	results = run_checks(range(run_config['gradcheck_seeds']), names=set(names) or None)
	if not results:
		raise UsageError(message='no checks matched {}'.format(', '.join(names)))
	worst = {}
	for result in results:
		worst[result.name] = max(worst.get(result.name, 0.0), result.max_rel_error)
	for name in sorted(worst):
		click.echo('{:<24} {:.3e}'.format(name, worst[name]))
	raise_on_failure(results)
