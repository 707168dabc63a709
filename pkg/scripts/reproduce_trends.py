import argparse
import logging
import os
import sys
from multiprocessing.dummy import Pool as ThreadPool

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from magnet.data.layout import split_dataset
from magnet.data.synth import SynthConfig, synth_generate
from magnet.graph.builder import build_tile_graph
from magnet.models.fusion import compare_models
from magnet.models.mdunet import UNetConfig
from magnet.training.trainer import TrainConfig, TrainingHistory, stage1_pretrain, stage2_joint

logging.basicConfig(
	level=logging.INFO, format="%(asctime)s [%(threadName)-12.12s] [%(levelname)-5.5s]  %(message)s",
	handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)

MAX_TPR_DROP = 0.05


def run_seed(seed, args):
	dataset = synth_generate(SynthConfig(tiles=args.tiles, tile_size=args.tile_size, seed=seed))
	train_set, val_set, test_set = split_dataset(dataset, 0.125, 0.125)
	graphs = {id(tile): build_tile_graph(tile, args.edge_thresh_px) for tile in dataset}

	unet_config = UNetConfig(tile_size=args.tile_size, base_filters=args.base_filters, seed=seed)
	train_config = TrainConfig(epoch_divisor=args.epoch_divisor, stage2_epochs=tuple(args.stage2_epochs), seed=seed)

	stage1 = TrainingHistory()
	unet, unet_checkpoint = stage1_pretrain(train_set, val_set, unet_config, train_config, stage1)
	stage2 = TrainingHistory()
	model, _ = stage2_joint(
		train_set, [graphs[id(tile)] for tile in train_set],
		val_set, [graphs[id(tile)] for tile in val_set],
		unet_checkpoint, unet_config, train_config, stage2,
	)
	comparison = compare_models(unet, model, test_set, [graphs[id(tile)] for tile in test_set])

	result = {
		'seed': seed,
		'stage1_first': stage1.rows[0]['train_loss'],
		'stage1_last': stage1.last('train_loss'),
		'stage1_val': stage1.last('val_loss'),
		'stage2_val': stage2.last('val_loss'),
		'fpr_delta': comparison.fpr_delta,
		'tpr_delta': comparison.tpr_delta,
	}
	result['loss_trend'] = result['stage1_last'] < 0.5 * result['stage1_first'] and result['stage2_val'] < result['stage1_val']
	result['fusion_trend'] = comparison.fpr_delta <= 0 and comparison.tpr_delta > -MAX_TPR_DROP
	return result


def main():
	parser = argparse.ArgumentParser(description='Reproduces the training-loss and fusion-benefit trends over several seeds')
	parser.add_argument('--seeds', type=int, nargs='+', help='Seeds', default=[0, 1, 2])
	parser.add_argument('--tiles', type=int, help='Tiles per dataset', default=64)
	parser.add_argument('--tile-size', type=int, help='Tile side in pixels', default=64)
	parser.add_argument('--base-filters', type=int, help='MD-Unet base filters', default=16)
	parser.add_argument('--edge-thresh-px', type=float, help='Graph edge threshold', default=8.0)
	parser.add_argument('--epoch-divisor', type=int, help='Stage-1 epoch divisor', default=5)
	parser.add_argument('--stage2-epochs', type=int, nargs=2, help='Stage-2 phase epochs', default=[4, 8])
	parser.add_argument('--threads', type=int, help='Threads number', default=3)
	args = parser.parse_args()

	pool = ThreadPool(args.threads)
	results = pool.map(lambda seed: run_seed(seed, args), args.seeds)
	pool.close()

	for result in results:
		logger.info(
			'seed %(seed)s: stage1 %(stage1_first).4g -> %(stage1_last).4g, val %(stage1_val).4g -> %(stage2_val).4g, '
			'FPR %(fpr_delta)+.4f, TPR %(tpr_delta)+.4f', result,
		)
	needed = (2 * len(results) + 2) // 3
	passed = True
	for trend in ('loss_trend', 'fusion_trend'):
		count = sum(1 for result in results if result[trend])
		logger.info('%s held in %s of %s seeds (need %s)', trend, count, len(results), needed)
		passed = passed and count >= needed
	sys.exit(0 if passed else 1)


if __name__ == '__main__':
	main()
