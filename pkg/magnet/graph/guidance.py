import logging
from dataclasses import dataclass

import numpy as np

from magnet.errors import GeometryError

logger = logging.getLogger(__name__)


@dataclass
class GuidanceMap:
	"""
	Layout-resolution grid S plus, per pixel, the index of the graph whose
	tile covers it (-1 outside every tile).
	"""
	grid: np.ndarray
	provenance: np.ndarray
	tile_size: int

	def _bounds(self, grid_x, grid_y):
		t = self.tile_size
		return slice(grid_y * t, (grid_y + 1) * t), slice(grid_x * t, (grid_x + 1) * t)

	def region(self, grid_x, grid_y):
		rows, cols = self._bounds(grid_x, grid_y)
		return self.grid[rows, cols].copy()

	def write_region(self, grid_x, grid_y, values):
		rows, cols = self._bounds(grid_x, grid_y)
		self.grid[rows, cols] = np.asarray(values).reshape(self.tile_size, self.tile_size, 1)


def build_guidance_map(graphs, layout_dims):
	"""
	Count prior: each tile's region holds its node count divided by the
	largest node count over all tiles; pinless tiles stay zero.
	"""
	height, width = layout_dims
	grid = np.zeros((height, width, 1))
	provenance = np.full((height, width), -1, dtype=np.int64)
	tile_size = graphs[0].tile_size if graphs else 0
	max_nodes = max((len(graph.nodes) for graph in graphs), default=0)

	for index, graph in enumerate(graphs):
		if graph.tile_size != tile_size:
			raise GeometryError(message='mixed tile sizes {} and {}'.format(tile_size, graph.tile_size))
		y0, x0 = graph.grid_y * tile_size, graph.grid_x * tile_size
		if y0 < 0 or x0 < 0 or y0 + tile_size > height or x0 + tile_size > width:
			raise GeometryError(message='tile ({}, {}) outside layout {}'.format(graph.grid_x, graph.grid_y, layout_dims))
		window = provenance[y0:y0 + tile_size, x0:x0 + tile_size]
		if np.any(window >= 0):
			raise GeometryError(message='tile ({}, {}) overlaps another tile'.format(graph.grid_x, graph.grid_y))
		window[...] = index
		if max_nodes:
			grid[y0:y0 + tile_size, x0:x0 + tile_size] = len(graph.nodes) / max_nodes

	logger.debug('Guidance map %sx%s from %s graphs (max %s nodes)', height, width, len(graphs), max_nodes)
	return GuidanceMap(grid, provenance, tile_size)
