import numpy as np
import pytest

from magnet.errors import GeometryError
from magnet.graph.builder import GraphNode, TileGraph, build_tile_graph
from magnet.graph.guidance import build_guidance_map


def graph_with(n_nodes, grid_x=0, grid_y=0, tile_size=16):
	nodes = [GraphNode(i, (1, 1), (0.0, 0.5, 0.0)) for i in range(n_nodes)]
	return TileGraph(grid_x, grid_y, tile_size, nodes, [])


def test_all_empty_layout_is_zero():
	guidance = build_guidance_map([graph_with(0, 0, 0), graph_with(0, 1, 0)], (16, 32))
	assert guidance.grid.shape == (16, 32, 1)
	assert not np.any(guidance.grid)


def test_single_tile_full_region():
	guidance = build_guidance_map([graph_with(3)], (16, 16))
	assert np.all(guidance.grid == 1.0)


def test_count_prior():
	guidance = build_guidance_map([graph_with(1, 0, 0), graph_with(2, 1, 0), graph_with(0, 0, 1)], (32, 32))
	assert np.all(guidance.region(0, 0) == 0.5)
	assert np.all(guidance.region(1, 0) == 1.0)
	assert np.all(guidance.region(0, 1) == 0.0)
	assert np.all(guidance.region(1, 1) == 0.0)


def test_provenance():
	guidance = build_guidance_map([graph_with(1, 0, 0), graph_with(2, 1, 0)], (32, 32))
	assert guidance.provenance[0, 0] == 0
	assert guidance.provenance[0, 16] == 1
	assert guidance.provenance[16, 0] == -1


def test_overlapping_tiles_rejected():
	with pytest.raises(GeometryError):
		build_guidance_map([graph_with(1), graph_with(2)], (16, 16))


def test_tile_outside_layout_rejected():
	with pytest.raises(GeometryError):
		build_guidance_map([graph_with(1, 2, 0)], (16, 32))


def test_write_region():
	guidance = build_guidance_map([graph_with(1, 0, 0), graph_with(1, 1, 0)], (16, 32))
	values = np.arange(256, dtype=np.float64).reshape(16, 16)
	guidance.write_region(1, 0, values)
	assert np.array_equal(guidance.region(1, 0)[..., 0], values)
	assert np.all(guidance.region(0, 0) == 1.0)


def test_dataset_layout(micro_dataset):
	graphs = [build_tile_graph(tile, 8.0) for tile in micro_dataset]
	guidance = build_guidance_map(graphs, micro_dataset.layout_dims)
	max_nodes = max(len(graph.nodes) for graph in graphs)
	for graph in graphs:
		assert np.all(guidance.region(graph.grid_x, graph.grid_y) == len(graph.nodes) / max_nodes)
	assert np.all(guidance.provenance[32:, 32:] == -1)
