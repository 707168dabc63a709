"""
Message passing over tile graphs.

Each layer builds a message per directed edge from the destination node,
the source node and the edge features, sums the messages arriving at each
node, and updates the node from that sum and its own vector.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from magnet.errors import GeometryError, ShapeError
from magnet.graph.builder import EDGE_FEATURES, NODE_FEATURES
from magnet.models.base import MLP, Linear, Module
from magnet.tensor import ops
from magnet.tensor.core import Tensor

logger = logging.getLogger(__name__)

N_LAYERS = 3
HIDDEN = 32
EMBEDDING = 16


class GnnLayer(Module):
	def __init__(self, rng, d_in, d_out, d_edge=EDGE_FEATURES, hidden=HIDDEN, d_emb=EMBEDDING):
		self.d_in = d_in
		self.d_emb = d_emb
		self.message = MLP(rng, [2 * d_in + d_edge, hidden, d_emb])
		self.update = MLP(rng, [d_emb + d_in, hidden, d_out])

	def __call__(self, v, graph_arrays):
		src, dst, edge_feat = graph_arrays
		n = v.shape[0]
		if len(src):
			messages = edge_message(self, ops.gather_rows(v, dst), ops.gather_rows(v, src), Tensor(edge_feat))
			e = aggregate(messages, dst, n)
		else:
			e = Tensor(np.zeros((n, self.d_emb)))
		return node_update(self, e, v)


def edge_message(layer, v_i, v_j, e_ij):
	"""Message to node i from node j; rows are edges when the inputs are stacked."""
	if v_i.shape != v_j.shape or v_i.shape[-1] != layer.d_in:
		raise ShapeError(op='edge_message', message='node vectors {} and {} vs width {}'.format(v_i.shape, v_j.shape, layer.d_in))
	if e_ij.shape[:-1] != v_i.shape[:-1]:
		raise ShapeError(op='edge_message', message='edge features {} vs nodes {}'.format(e_ij.shape, v_i.shape))
	return layer.message(ops.concatenate([v_i, v_j, e_ij], axis=-1))


def aggregate(messages, dst, n_nodes):
	"""Sums the messages per destination; nodes without incoming edges get zeros."""
	return ops.scatter_add_rows(messages, dst, n_nodes)


def node_update(layer, e_i, v_i):
	if e_i.shape[-1] != layer.d_emb or v_i.shape[-1] != layer.d_in or e_i.shape[:-1] != v_i.shape[:-1]:
		raise ShapeError(op='node_update', message='aggregate {} and node {} do not fit the layer'.format(e_i.shape, v_i.shape))
	return layer.update(ops.concatenate([e_i, v_i], axis=-1))


class TileGNN(Module):
	def __init__(self, rng, d_node=NODE_FEATURES, width=EMBEDDING, n_layers=N_LAYERS):
		dims = [d_node] + [width] * n_layers
		self.layers = [GnnLayer(rng, d_in, d_out) for d_in, d_out in zip(dims[:-1], dims[1:])]
		self.readout = Linear(rng, dims[-1], 1)

	def __call__(self, graph):
		return gnn_forward(self, graph)


@dataclass
class NodeEmbedding:
	vectors: List[Tensor] = field(default_factory=list)
	scores: Tensor = None

	def __len__(self):
		return 0 if self.scores is None else self.scores.shape[0]


def gnn_forward(gnn, graph):
	if graph.is_empty:
		return NodeEmbedding([], Tensor(np.zeros(0)))
	src, dst = graph.edge_index()
	arrays = (src, dst, graph.edge_features())
	v = Tensor(graph.node_features())
	vectors = [v]
	for layer in gnn.layers:
		v = layer(v, arrays)
		vectors.append(v)
	scores = ops.sigmoid(gnn.readout(v)).reshape(len(graph.nodes))
	return NodeEmbedding(vectors, scores)


def project_to_grid(embeddings, graphs, layout_dims, origin=(0, 0), guidance=None):
	"""
	Scatters each node's score to its pin-center pixel and averages
	collisions; pixels without nodes are zero.

	`origin` is the (grid_x, grid_y) of the tile at the map's top-left corner,
	so a single tile projects with origin=(graph.grid_x, graph.grid_y) and
	layout_dims=(tile_size, tile_size). When `guidance` is given, the result
	is written into its grid at the matching position.
	"""
	height, width = layout_dims
	values, index = [], []
	for embedding, graph in zip(embeddings, graphs):
		if not len(embedding):
			continue
		t = graph.tile_size
		y0 = (graph.grid_y - origin[1]) * t
		x0 = (graph.grid_x - origin[0]) * t
		for node in graph.nodes:
			px, py = node.pixel
			if not (0 <= px < t and 0 <= py < t):
				raise GeometryError(message='pin {} center {} outside its tile'.format(node.pin_ref, node.pixel))
			y, x = y0 + py, x0 + px
			if not (0 <= y < height and 0 <= x < width):
				raise GeometryError(message='pin {} center ({}, {}) outside layout {}'.format(node.pin_ref, x, y, layout_dims))
			index.append(y * width + x)
		values.append(embedding.scores)

	if values:
		flat = ops.scatter_mean(ops.concatenate(values, axis=0), np.array(index), height * width)
		projected = flat.reshape(height, width, 1)
	else:
		projected = Tensor(np.zeros((height, width, 1)))

	if guidance is not None:
		t = guidance.tile_size
		rows = slice(origin[1] * t, origin[1] * t + height)
		cols = slice(origin[0] * t, origin[0] * t + width)
		guidance.grid[rows, cols] = projected.data
	return projected
