import json
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from marshmallow import ValidationError

from magnet.errors import ConfigError, DataError, GeometryError
from magnet.graph.steiner import HORIZONTAL, NetTopology, direction_flag, routing_direction
from magnet.schemas import GRAPH_VERSION, TileGraphSchema

logger = logging.getLogger(__name__)

NODE_FEATURES = 3
EDGE_FEATURES = 2


@dataclass(frozen=True)
class GraphNode:
	pin_ref: int
	pixel: Tuple[int, int]
	feat: Tuple[float, float, float]


@dataclass(frozen=True)
class GraphEdge:
	src: int
	dst: int
	feat: Tuple[float, float]


@dataclass
class TileGraph:
	grid_x: int
	grid_y: int
	tile_size: int
	nodes: List[GraphNode] = field(default_factory=list)
	edges: List[GraphEdge] = field(default_factory=list)

	@property
	def is_empty(self):
		return not self.nodes

	def node_features(self):
		return np.array([node.feat for node in self.nodes], dtype=np.float64).reshape(-1, NODE_FEATURES)

	def edge_features(self):
		return np.array([edge.feat for edge in self.edges], dtype=np.float64).reshape(-1, EDGE_FEATURES)

	def edge_index(self):
		src = np.array([edge.src for edge in self.edges], dtype=np.int64)
		dst = np.array([edge.dst for edge in self.edges], dtype=np.int64)
		return src, dst

	def edge_set(self):
		return {(edge.src, edge.dst) for edge in self.edges}


def node_coord_feature(pin, layer_routing_dir, tile_size):
	cx, cy = pin.center
	return (cx if layer_routing_dir == HORIZONTAL else cy) / tile_size


def covered_area(rect, others):
	"""Area of `rect` covered by the union of `others`, exact for any coordinates."""
	clipped = []
	for other in others:
		x0, y0 = max(rect.x0, other.x0), max(rect.y0, other.y0)
		x1, y1 = min(rect.x1, other.x1), min(rect.y1, other.y1)
		if x0 < x1 and y0 < y1:
			clipped.append((x0, y0, x1, y1))
	if not clipped:
		return 0.0

	xs = np.unique([rect.x0, rect.x1] + [c[0] for c in clipped] + [c[2] for c in clipped])
	ys = np.unique([rect.y0, rect.y1] + [c[1] for c in clipped] + [c[3] for c in clipped])
	covered = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
	for x0, y0, x1, y1 in clipped:
		covered[np.searchsorted(ys, y0):np.searchsorted(ys, y1), np.searchsorted(xs, x0):np.searchsorted(xs, x1)] = True
	cell_areas = np.diff(ys)[:, None] * np.diff(xs)[None, :]
	return float(cell_areas[covered].sum())


def obstacle_density(pin, all_pins, n_layers=None):
	"""
	Mean, over the existing adjacent layers, of the fraction of the pin's area
	covered by pins on that layer.
	"""
	if not pin.area > 0:
		raise GeometryError(message='pin {} has zero area'.format(pin))
	if n_layers is None:
		n_layers = max([p.layer for p in all_pins] + [pin.layer])
	ratios = []
	for layer in (pin.layer - 1, pin.layer + 1):
		if 1 <= layer <= n_layers:
			covering = [other for other in all_pins if other.layer == layer]
			ratios.append(covered_area(pin, covering) / pin.area)
	return float(np.mean(ratios)) if ratios else 0.0


def _squared_distance(a, b):
	dx, dy = a[0] - b[0], a[1] - b[1]
	return dx * dx + dy * dy


def brute_force_edges(pins, thresh):
	edges = set()
	for i, a in enumerate(pins):
		for j, b in enumerate(pins):
			if i != j and a.layer == b.layer and _squared_distance(a.center, b.center) < thresh * thresh:
				edges.add((i, j))
	return edges


def _candidate_pairs(pins, thresh):
	if len(pins) < 2:
		return []
	centers = np.array([pin.center for pin in pins], dtype=np.float64)
	layers = np.array([pin.layer for pin in pins])
	pairs = []
	for layer in np.unique(layers):
		members = np.flatnonzero(layers == layer)
		if len(members) < 2:
			continue
		delta = centers[members][:, None, :] - centers[members][None, :, :]
		squared = delta[..., 0] * delta[..., 0] + delta[..., 1] * delta[..., 1]
		close = squared < thresh * thresh
		np.fill_diagonal(close, False)
		for a, b in zip(*np.nonzero(close)):
			pairs.append((int(members[a]), int(members[b]), float(np.sqrt(squared[a, b]))))
	return pairs


def build_tile_graph(tile, edge_thresh_px):
	if not edge_thresh_px > 0:
		raise ConfigError(field='edge_thresh_px', message='must be positive, got {}'.format(edge_thresh_px))
	size = tile.tile_size
	pins = list(tile.pins)

	nodes = []
	for index, pin in enumerate(pins):
		nodes.append(GraphNode(
			pin_ref=index,
			pixel=pin.center_pixel,
			feat=(
				node_coord_feature(pin, routing_direction(pin.layer), size),
				pin.layer / tile.n_layers,
				obstacle_density(pin, pins, tile.n_layers),
			),
		))

	topology = NetTopology(pins)
	edges = [
		GraphEdge(src=src, dst=dst, feat=(distance / edge_thresh_px, float(direction_flag(dst, src, topology))))
		for src, dst, distance in _candidate_pairs(pins, edge_thresh_px)
	]
	edges.sort(key=lambda edge: (edge.dst, edge.src))

	graph = TileGraph(tile.grid_x, tile.grid_y, size, nodes, edges)
	logger.debug('Tile (%s, %s): %s nodes, %s edges', tile.grid_x, tile.grid_y, len(nodes), len(edges))
	return graph


def graph_to_dict(graph):
	return TileGraphSchema().dump({
		'version': GRAPH_VERSION,
		'grid_x': graph.grid_x,
		'grid_y': graph.grid_y,
		'tile_size': graph.tile_size,
		'is_empty': graph.is_empty,
		'nodes': graph.nodes,
		'edges': graph.edges,
	})


def save_graph(graph, path):
	with open(path, 'w', encoding='utf-8') as file:
		json.dump(graph_to_dict(graph), file, indent=1, sort_keys=True)


def load_graph(path):
	try:
		with open(path, encoding='utf-8') as file:
			data = TileGraphSchema().load(json.load(file))
	except (ValidationError, ValueError) as error:
		raise DataError(source=getattr(error, 'messages', None), message='invalid graph {}: {}'.format(path, error))
	nodes = [GraphNode(n['pin_ref'], tuple(n['pixel']), tuple(n['feat'])) for n in data['nodes']]
	edges = [GraphEdge(e['src'], e['dst'], tuple(e['feat'])) for e in data['edges']]
	graph = TileGraph(data['grid_x'], data['grid_y'], data['tile_size'], nodes, edges)
	if graph.is_empty != data['is_empty']:
		raise DataError(message='graph {} is_empty flag disagrees with its node list'.format(path))
	return graph
