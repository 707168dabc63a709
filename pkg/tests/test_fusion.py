import numpy as np
import pytest

from magnet.errors import ShapeError
from magnet.graph.builder import TileGraph, build_tile_graph
from magnet.graph.guidance import build_guidance_map
from magnet.models.base import set_all
from magnet.models.fusion import (
	DiscriminatorHead, MagNet, discriminator_forward, forward_maps, fuse_outputs, magnet_forward, threshold_binarize, unet_forward,
)
from magnet.models.mdunet import UNetConfig
from magnet.tensor import ops
from magnet.tensor.core import Tensor, no_grad


def test_threshold_is_inclusive():
	assert threshold_binarize(np.array([0.1])).tolist() == [1.0]
	assert threshold_binarize(np.array([0.0999])).tolist() == [0.0]
	assert np.all(threshold_binarize(np.ones((4, 4, 1))) == 1.0)
	assert threshold_binarize(Tensor([0.3, 0.05]), thresh=0.2).tolist() == [1.0, 0.0]


def test_threshold_is_monotone():
	rng = np.random.default_rng(0)
	p = rng.uniform(size=200)
	raised = np.minimum(1.0, p + rng.uniform(0, 0.2, size=200) * (rng.uniform(size=200) < 0.5))
	assert np.all(threshold_binarize(raised) >= threshold_binarize(p))


def test_fuse_outputs():
	rng = np.random.default_rng(1)
	unet_map = Tensor(rng.uniform(size=(64, 64, 1)))
	fused = fuse_outputs(unet_map, Tensor(np.zeros((64, 64, 1))))
	assert fused.shape == (64, 64, 2)
	assert np.array_equal(fused.data[..., :1], unet_map.data)
	assert not np.any(fused.data[..., 1])
	left, right = ops.split_channels(fused, [1, 1])
	assert np.array_equal(left.data, unet_map.data)
	with pytest.raises(ShapeError):
		fuse_outputs(unet_map, Tensor(np.zeros((32, 64, 1))))
	with pytest.raises(ShapeError):
		fuse_outputs(unet_map, Tensor(np.zeros((64, 64, 2))))


def test_discriminator_zero_weights():
	head = set_all(DiscriminatorHead(np.random.default_rng(0)), 0.0)
	out = discriminator_forward(head, Tensor(np.random.default_rng(1).uniform(size=(8, 8, 2))))
	assert np.all(out.data == 0.5)


def test_discriminator_shape_and_range():
	head = DiscriminatorHead(np.random.default_rng(2))
	assert head.conv1.kernel.shape == (3, 3, 2, 16)
	assert head.conv2.kernel.shape == (1, 1, 16, 1)
	out = head(Tensor(np.random.default_rng(3).uniform(size=(64, 64, 2))))
	assert out.shape == (64, 64, 1)
	assert np.all((out.data > 0) & (out.data < 1))
	with pytest.raises(ShapeError):
		head(Tensor(np.ones((8, 8, 3))))


def test_parameter_layout(micro_config):
	model = MagNet(micro_config)
	names = [name for name, _ in model.named_parameters()]
	assert len(names) == len(set(names))
	assert names[0].startswith('unet.')
	assert 'guided.channel.w_s' in names
	assert 'guided.spatial.kernel' in names
	assert not any(name.startswith('bottleneck_channel') for name in names)
	assert all(param.name == name for name, param in model.named_parameters())
	assert model.guided.channel._shared is model.unet.dam.channel


def test_parameter_layout_without_dam():
	model = MagNet(UNetConfig(tile_size=16, base_filters=2, use_dam=False))
	names = [name for name, _ in model.named_parameters()]
	assert 'bottleneck_channel.w1' in names
	assert model.guided.channel._shared is model.bottleneck_channel


def test_pipeline_on_tiles(micro_config, micro_dataset):
	model = MagNet(micro_config)
	for tile in micro_dataset.tiles[:3]:
		graph = build_tile_graph(tile, 8.0)
		prediction = magnet_forward(model, tile, graph)
		assert prediction.prob_map.shape == (16, 16, 1)
		assert np.all((prediction.prob_map > 0) & (prediction.prob_map < 1))
		assert set(np.unique(prediction.binary_map)) <= {0.0, 1.0}
		assert np.array_equal(prediction.binary_map, threshold_binarize(prediction.prob_map))
		assert np.count_nonzero(prediction.gnn_map) <= len(graph.nodes)


def test_empty_graph_pipeline(micro_config, micro_dataset):
	model = MagNet(micro_config)
	tile = micro_dataset.tiles[0]
	prediction = magnet_forward(model, tile, TileGraph(tile.grid_x, tile.grid_y, 16))
	assert not np.any(prediction.gnn_map)
	assert np.all((prediction.prob_map > 0) & (prediction.prob_map < 1))


def test_magnet_is_deterministic(micro_config, micro_dataset):
	tile = micro_dataset.tiles[1]
	graph = build_tile_graph(tile, 8.0)
	first = magnet_forward(MagNet(micro_config), tile, graph)
	second = magnet_forward(MagNet(micro_config), tile, graph)
	assert first.prob_map.tobytes() == second.prob_map.tobytes()
	assert first.density_map.tobytes() == second.density_map.tobytes()


def test_guidance_region_overwritten(micro_config, micro_dataset):
	model = MagNet(micro_config)
	graphs = [build_tile_graph(tile, 8.0) for tile in micro_dataset]
	guidance = build_guidance_map(graphs, micro_dataset.layout_dims)
	tile, graph = micro_dataset.tiles[4], graphs[4]
	prediction = magnet_forward(model, tile, graph, guidance)
	assert np.array_equal(guidance.region(tile.grid_x, tile.grid_y), prediction.gnn_map)


def test_graph_tile_size_mismatch(micro_config, micro_dataset):
	with pytest.raises(ShapeError):
		forward_maps(MagNet(micro_config), micro_dataset.tiles[0].features, TileGraph(0, 0, 32))


def test_unet_forward_has_no_gnn_channel(micro_config, micro_dataset):
	model = MagNet(micro_config)
	prediction = unet_forward(model.unet, micro_dataset.tiles[0])
	assert np.array_equal(prediction.prob_map, prediction.density_map)
	assert not np.any(prediction.gnn_map)


def test_guided_attention_replaces_dam(micro_config, micro_dataset):
	model = MagNet(micro_config)
	tile = micro_dataset.tiles[2]
	with no_grad():
		density, _, _ = forward_maps(model, tile.features, TileGraph(tile.grid_x, tile.grid_y, 16))
		plain = model.unet(tile.features)
	assert not np.array_equal(density.data, plain.data)
