"""
Deterministic synthetic layout generator.

Each tile gets its own PRNG stream derived from (seed, tile index), so tiles
can be generated in any order or in parallel with identical results.

Feature channels:
	0-2  pin coverage mask per routing layer
	3-5  obstacle mask per routing layer
	6    windowed congestion (pin count in a 9x9 window, saturating)
	7    macro mask
	8    net density (overlapping net bounding boxes, normalized)

Layers fold into the three per-layer slots: layer 1 and 2 keep their own slot,
layer 3 and everything above share the third. With fewer than three layers
the unused slots stay zero.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from magnet.data.layout import N_FEATURES, Dataset, DatasetMeta, LayoutTile, Obstacle, Pin
from magnet.errors import ConfigError

logger = logging.getLogger(__name__)

CONGESTION_RADIUS = 2
CONGESTION_SATURATION = 12.0
FEATURE_WINDOW_RADIUS = 4
FEATURE_WINDOW_SATURATION = 24.0
LAYER_SLOTS = 3


@dataclass
class SynthConfig:
	tiles: int = 64
	tile_size: int = 64
	n_layers: int = 3
	pin_rate: float = 6.0
	obstacle_rate: float = 2.0
	macro_rate: float = 0.25
	seed: int = 0

	def validate(self):
		if self.tile_size <= 0 or self.tile_size % 16:
			raise ConfigError(field='tile_size', message='must be a positive multiple of 16, got {}'.format(self.tile_size))
		if self.tiles < 1:
			raise ConfigError(field='tiles', message='must be at least 1, got {}'.format(self.tiles))
		if self.n_layers < 1:
			raise ConfigError(field='n_layers', message='must be at least 1, got {}'.format(self.n_layers))
		if self.pin_rate < 0 or self.obstacle_rate < 0 or not 0 <= self.macro_rate <= 1:
			raise ConfigError(field='pin_rate', message='rates must be non-negative and macro_rate <= 1')


def window_sum(grid, radius):
	padded = np.pad(grid, radius)
	side = 2 * radius + 1
	return sliding_window_view(padded, (side, side)).sum(axis=(-2, -1))


def pin_count_map(pins, size):
	counts = np.zeros((size, size))
	for pin in pins:
		px, py = pin.center_pixel
		counts[py, px] += 1
	return counts


def rasterize(rects, size):
	mask = np.zeros((size, size))
	for rect in rects:
		mask[int(math.floor(rect.y0)):int(math.ceil(rect.y1)), int(math.floor(rect.x0)):int(math.ceil(rect.x1))] = 1.0
	return mask


def congestion_map(pins, size):
	return np.minimum(1.0, window_sum(pin_count_map(pins, size), CONGESTION_RADIUS) / CONGESTION_SATURATION)


def obstacle_overlap_map(obstacles, size, n_layers):
	layers = sum(rasterize([o for o in obstacles if o.layer == layer], size) for layer in range(1, n_layers + 1))
	return (np.asarray(layers) >= 2).astype(np.float64)


def congestion_label(pins, obstacles, size, n_layers):
	"""Violation density oracle: min(1, 0.6 c + 0.4 c o), shaped size x size x 1."""
	c = congestion_map(pins, size)
	o = obstacle_overlap_map(obstacles, size, n_layers)
	return np.minimum(1.0, 0.6 * c + 0.4 * c * o)[..., None]


def _net_density(pins, size):
	density = np.zeros((size, size))
	for net_id in sorted({pin.net_id for pin in pins}):
		centers = [pin.center_pixel for pin in pins if pin.net_id == net_id]
		xs, ys = zip(*centers)
		density[min(ys):max(ys) + 1, min(xs):max(xs) + 1] += 1.0
	return density / max(1.0, density.max())


def layer_slot(layer):
	return min(layer, LAYER_SLOTS) - 1


def layout_features(pins, obstacles, macros, size, n_layers):
	channels = np.zeros((size, size, N_FEATURES))
	for slot in range(min(n_layers, LAYER_SLOTS)):
		channels[..., slot] = rasterize([p for p in pins if layer_slot(p.layer) == slot], size)
		channels[..., LAYER_SLOTS + slot] = rasterize([o for o in obstacles if layer_slot(o.layer) == slot], size)
	counts = window_sum(pin_count_map(pins, size), FEATURE_WINDOW_RADIUS)
	channels[..., 6] = np.minimum(1.0, counts / FEATURE_WINDOW_SATURATION)
	channels[..., 7] = rasterize(macros, size)
	channels[..., 8] = _net_density(pins, size)
	return channels


def _random_rect(rng, size, min_side, max_side, center=None, spread=None):
	w, h = (int(v) for v in rng.integers(min_side, max_side + 1, size=2))
	if center is None:
		x0 = int(rng.integers(0, size - w + 1))
		y0 = int(rng.integers(0, size - h + 1))
	else:
		cx, cy = rng.normal(center, spread)
		x0 = int(np.clip(round(cx - w / 2), 0, size - w))
		y0 = int(np.clip(round(cy - h / 2), 0, size - h))
	return x0, y0, x0 + w, y0 + h


def generate_tile(config, index):
	rng = np.random.default_rng([config.seed, index])
	size, n_layers = config.tile_size, config.n_layers
	area_units = (size / 32.0) ** 2

	macros = []
	if rng.random() < config.macro_rate:
		macros.append(Obstacle(*_random_rect(rng, size, size // 6, size // 3), layer=1))

	obstacles = []
	for layer in range(1, n_layers + 1):
		for _ in range(rng.poisson(config.obstacle_rate * area_units)):
			obstacles.append(Obstacle(*_random_rect(rng, size, 2, 8), layer=layer))
		obstacles.extend(Obstacle(m.x0, m.y0, m.x1, m.y1, layer=layer) for m in macros)

	hotspots = rng.uniform(size * 0.15, size * 0.85, size=(int(rng.integers(1, 4)), 2))
	pins, net_id, net_left = [], 0, 0
	for _ in range(rng.poisson(config.pin_rate * area_units)):
		if rng.random() < 0.6:
			rect = _random_rect(rng, size, 1, 3, center=hotspots[rng.integers(len(hotspots))], spread=size / 10.0)
		else:
			rect = _random_rect(rng, size, 1, 3)
		if net_left == 0:
			net_id, net_left = net_id + 1, int(rng.integers(2, 5))
		net_left -= 1
		pins.append(Pin(*rect, layer=int(rng.integers(1, n_layers + 1)), net_id=net_id))

	cols = int(math.ceil(math.sqrt(config.tiles)))
	return LayoutTile(
		grid_x=index % cols,
		grid_y=index // cols,
		features=layout_features(pins, obstacles, macros, size, n_layers),
		label=congestion_label(pins, obstacles, size, n_layers),
		pins=pins,
		obstacles=obstacles,
		n_layers=n_layers,
	)


def synth_generate(config):
	config.validate()
	tiles = [generate_tile(config, index) for index in range(config.tiles)]
	logger.info(
		'Generated %s synthetic tiles of %sx%s (seed %s, %s pins total)',
		len(tiles), config.tile_size, config.tile_size, config.seed, sum(len(t.pins) for t in tiles),
	)
	return Dataset(tiles, DatasetMeta(config.tile_size, config.n_layers, config.seed))
