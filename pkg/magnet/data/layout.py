from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from magnet.errors import ConfigError, GeometryError

N_FEATURES = 9


@dataclass(frozen=True)
class Rect:
	x0: float
	y0: float
	x1: float
	y1: float
	layer: int

	@property
	def area(self):
		return (self.x1 - self.x0) * (self.y1 - self.y0)

	@property
	def center(self):
		return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

	@property
	def center_pixel(self):
		cx, cy = self.center
		return int(np.floor(cx)), int(np.floor(cy))

	def validate(self, tile_size, n_layers):
		if not (self.x0 < self.x1 and self.y0 < self.y1):
			raise GeometryError(message='degenerate rectangle {}'.format(self))
		if self.x0 < 0 or self.y0 < 0 or self.x1 > tile_size or self.y1 > tile_size:
			raise GeometryError(message='rectangle {} outside tile of size {}'.format(self, tile_size))
		if not 1 <= self.layer <= n_layers:
			raise GeometryError(message='layer {} outside [1, {}]'.format(self.layer, n_layers))


@dataclass(frozen=True)
class Pin(Rect):
	net_id: int = 0


@dataclass(frozen=True)
class Obstacle(Rect):
	pass


@dataclass
class LayoutTile:
	grid_x: int
	grid_y: int
	features: np.ndarray
	label: np.ndarray
	pins: List[Pin] = field(default_factory=list)
	obstacles: List[Obstacle] = field(default_factory=list)
	n_layers: int = 3

	@property
	def tile_size(self):
		return self.features.shape[0]

	def validate(self):
		size = self.tile_size
		if self.features.shape != (size, size, N_FEATURES):
			raise GeometryError(message='features have shape {}'.format(self.features.shape))
		if self.label.shape != (size, size, 1):
			raise GeometryError(message='label has shape {}'.format(self.label.shape))
		if not np.all(np.isfinite(self.features)):
			raise GeometryError(message='non-finite features in tile ({}, {})'.format(self.grid_x, self.grid_y))
		for rect in list(self.pins) + list(self.obstacles):
			rect.validate(size, self.n_layers)


@dataclass
class DatasetMeta:
	tile_size: int
	n_layers: int
	seed: int


@dataclass
class Dataset:
	tiles: List[LayoutTile]
	meta: DatasetMeta
	split: str = 'train'

	def __len__(self):
		return len(self.tiles)

	def __iter__(self):
		return iter(self.tiles)

	@property
	def grid_dims(self):
		if not self.tiles:
			return 0, 0
		return max(t.grid_y for t in self.tiles) + 1, max(t.grid_x for t in self.tiles) + 1

	@property
	def layout_dims(self):
		rows, cols = self.grid_dims
		return rows * self.meta.tile_size, cols * self.meta.tile_size


def split_dataset(dataset, val_fraction, test_fraction):
	"""
	Cuts a dataset into disjoint train/val/test parts in tile order.

	Val and test each get at least one tile whenever their fraction is
	positive and enough tiles exist.
	"""
	n = len(dataset)
	n_val = max(1, int(round(n * val_fraction))) if val_fraction > 0 and n >= 3 else 0
	n_test = max(1, int(round(n * test_fraction))) if test_fraction > 0 and n >= 3 else 0
	n_train = n - n_val - n_test
	if n_train <= 0:
		raise ConfigError(field='val_fraction', message='no tiles left for training out of {}'.format(n))
	tiles = dataset.tiles
	return (
		Dataset(tiles[:n_train], dataset.meta, 'train'),
		Dataset(tiles[n_train:n_train + n_val], dataset.meta, 'val'),
		Dataset(tiles[n_train + n_val:], dataset.meta, 'test'),
	)


def amplify_labels(tile, factor):
	"""Returns a copy whose label is scaled by `factor`, deliberately unclamped."""
	if not factor > 0:
		raise ConfigError(field='amplification', message='factor must be positive, got {}'.format(factor))
	return replace(tile, label=tile.label * float(factor))


def binarize_truth(label):
	return (np.asarray(label) > 0).astype(np.float64)
