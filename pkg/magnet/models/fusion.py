import logging
from dataclasses import dataclass

import numpy as np

from magnet.errors import ShapeError
from magnet.metrics.report import Comparison, evaluate
from magnet.models.attention import ChannelAttention, GuidedAttention
from magnet.models.base import Conv, Module
from magnet.models.gnn import TileGNN, gnn_forward, project_to_grid
from magnet.models.mdunet import MDUnet
from magnet.tensor import ops
from magnet.tensor.core import Tensor, no_grad

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1


class DiscriminatorHead(Module):
	def __init__(self, rng, hidden=16):
		self.conv1 = Conv(rng, 3, 2, hidden)
		self.conv2 = Conv(rng, 1, hidden, 1)

	def __call__(self, fused):
		return discriminator_forward(self, fused)


def discriminator_forward(head, fused):
	if fused.ndim != 3 or fused.shape[2] != 2:
		raise ShapeError(op='discriminator', message='expected a 2-channel map, got {}'.format(fused.shape))
	return ops.sigmoid(head.conv2(ops.relu(head.conv1(fused))))


def fuse_outputs(unet_map, gnn_map):
	"""Channel 0 is the MD-Unet map, channel 1 the projected GNN map."""
	for name, m in (('unet_map', unet_map), ('gnn_map', gnn_map)):
		if m.ndim != 3 or m.shape[2] != 1:
			raise ShapeError(op='fuse_outputs', message='{} must be H x W x 1, got {}'.format(name, m.shape))
	return ops.concat_channels(unet_map, gnn_map)


def threshold_binarize(prob_map, thresh=DEFAULT_THRESHOLD):
	data = prob_map.data if isinstance(prob_map, Tensor) else np.asarray(prob_map, dtype=np.float64)
	return (data >= thresh).astype(np.float64)


class MagNet(Module):
	"""
	MD-Unet and tile GNN side by side. The projected GNN map guides the
	bottleneck attention and is stacked with the MD-Unet map for the
	discriminator head.

	Parameter names of the MD-Unet part carry the `unet.` prefix, matching
	a stage-1 checkpoint.
	"""

	def __init__(self, unet_config, seed=None):
		seed = unet_config.seed if seed is None else seed
		self.unet = MDUnet(unet_config)
		rng = np.random.default_rng([seed, 1])
		self.gnn = TileGNN(rng)
		if self.unet.dam is not None:
			channel_attention = self.unet.dam.channel
		else:
			self.bottleneck_channel = ChannelAttention(rng, unet_config.bottleneck_channels, unet_config.reduction)
			channel_attention = self.bottleneck_channel
		self.guided = GuidedAttention(rng, channel_attention, unet_config.spatial_kernel)
		self.head = DiscriminatorHead(rng)
		self.bind_names()

	@property
	def config(self):
		return self.unet.config

	def __call__(self, features, graph):
		return forward_maps(self, features, graph)


def forward_maps(model, features, graph):
	"""Differentiable forward for one tile: (density map, GNN map, probability map)."""
	config = model.config
	size = config.tile_size
	if graph.tile_size != size:
		raise ShapeError(op='magnet', message='graph tile size {} != model tile size {}'.format(graph.tile_size, size))

	embedding = gnn_forward(model.gnn, graph)
	gnn_map = project_to_grid([embedding], [graph], (size, size), origin=(graph.grid_x, graph.grid_y))
	guidance = ops.avg_pool(gnn_map, size // config.bottleneck_size)
	density = model.unet(features, bottleneck_attention=model.guided.bind(guidance))
	prob = discriminator_forward(model.head, fuse_outputs(density, gnn_map))
	return density, gnn_map, prob


@dataclass
class Prediction:
	density_map: np.ndarray
	gnn_map: np.ndarray
	prob_map: np.ndarray
	binary_map: np.ndarray


def magnet_forward(model, tile, graph, guidance=None, threshold=DEFAULT_THRESHOLD):
	"""
	Inference for one tile. When a GuidanceMap is given, the tile's projected
	GNN map is written into its region.
	"""
	with no_grad():
		density, gnn_map, prob = forward_maps(model, tile.features, graph)
	if guidance is not None:
		guidance.write_region(graph.grid_x, graph.grid_y, gnn_map.data)
	return Prediction(density.numpy(), gnn_map.numpy(), prob.numpy(), threshold_binarize(prob, threshold))


def unet_forward(unet, tile, threshold=DEFAULT_THRESHOLD):
	"""MD-Unet alone: the density map is the probability map and the GNN map is zero."""
	with no_grad():
		density = unet(tile.features).numpy()
	return Prediction(density, np.zeros_like(density), density, threshold_binarize(density, threshold))


def compare_models(unet, model, dataset, graphs, threshold=DEFAULT_THRESHOLD):
	"""
	Evaluates MD-Unet alone and the full model on the same tiles and reports
	the FPR/TPR deltas (full model minus MD-Unet).
	"""
	unet_maps = [unet_forward(unet, tile, threshold).prob_map for tile in dataset]
	magnet_maps = [magnet_forward(model, tile, graph, threshold=threshold).prob_map for tile, graph in zip(dataset, graphs)]
	unet_report = evaluate(dataset, unet_maps, threshold)
	magnet_report = evaluate(dataset, magnet_maps, threshold)
	comparison = Comparison(unet_report, magnet_report)
	logger.info('FPR %.4f -> %.4f, TPR %.4f -> %.4f', unet_report.fpr, magnet_report.fpr, unet_report.tpr, magnet_report.tpr)
	return comparison
