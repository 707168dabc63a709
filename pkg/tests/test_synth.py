import numpy as np
import pytest

from magnet.data.layout import Dataset, DatasetMeta, LayoutTile, Obstacle, Pin, amplify_labels, binarize_truth, split_dataset
from magnet.data.storage import load_dataset, save_dataset, tile_stem
from magnet.data.synth import SynthConfig, congestion_label, congestion_map, layout_features, synth_generate
from magnet.errors import ConfigError, GeometryError


def oracle_label(tile):
	"""Recomputes the congestion label pixel by pixel from the pin and obstacle lists."""
	size = tile.tile_size
	label = np.zeros((size, size, 1))
	centers = [(int(np.floor((p.x0 + p.x1) / 2)), int(np.floor((p.y0 + p.y1) / 2))) for p in tile.pins]
	for y in range(size):
		for x in range(size):
			count = sum(1 for px, py in centers if abs(px - x) <= 2 and abs(py - y) <= 2)
			c = min(1.0, count / 12.0)
			layers = {o.layer for o in tile.obstacles if o.x0 <= x < o.x1 and o.y0 <= y < o.y1}
			o = 1.0 if len(layers) >= 2 else 0.0
			label[y, x, 0] = min(1.0, 0.6 * c + 0.4 * c * o)
	return label


def blank_tile(size=16, **kwargs):
	return LayoutTile(0, 0, np.zeros((size, size, 9)), np.zeros((size, size, 1)), **kwargs)


def test_same_seed_is_bit_identical():
	config = SynthConfig(tiles=4, tile_size=32, seed=3)
	first, second = synth_generate(config), synth_generate(config)
	for a, b in zip(first, second):
		assert a.features.tobytes() == b.features.tobytes()
		assert a.label.tobytes() == b.label.tobytes()
		assert a.pins == b.pins
		assert a.obstacles == b.obstacles


def test_different_seeds_differ():
	a = synth_generate(SynthConfig(tiles=2, tile_size=32, seed=1))
	b = synth_generate(SynthConfig(tiles=2, tile_size=32, seed=2))
	assert any(x.features.tobytes() != y.features.tobytes() for x, y in zip(a, b))


def test_shapes_and_grid(micro_dataset):
	assert len(micro_dataset) == 8
	for tile in micro_dataset:
		tile.validate()
		assert tile.features.shape == (16, 16, 9)
		assert tile.label.shape == (16, 16, 1)
	assert micro_dataset.grid_dims == (3, 3)
	assert micro_dataset.layout_dims == (48, 48)


def test_labels_match_oracle():
	for tile in synth_generate(SynthConfig(tiles=6, tile_size=16, pin_rate=30.0, obstacle_rate=6.0, seed=7)):
		np.testing.assert_allclose(tile.label, oracle_label(tile), rtol=0, atol=1e-12)


def test_label_zero_without_pins():
	label = congestion_label([], [Obstacle(0, 0, 8, 8, layer=1), Obstacle(0, 0, 8, 8, layer=2)], 16, 3)
	assert not np.any(label)


def test_label_saturates_with_overlap():
	pins = [Pin(10, 10, 11, 11, layer=1, net_id=1) for _ in range(12)]
	obstacles = [Obstacle(8, 8, 13, 13, layer=1), Obstacle(8, 8, 13, 13, layer=2)]
	label = congestion_label(pins, obstacles, 32, 3)
	assert label[10, 10, 0] == 1.0
	assert label[30, 30, 0] == 0.0


def test_binarized_truth_matches_congestion(micro_dataset):
	for tile in micro_dataset:
		c = congestion_map(tile.pins, tile.tile_size)
		assert np.array_equal(binarize_truth(tile.label)[..., 0], (c > 0).astype(np.float64))


def test_binarize_truth_strict_positivity():
	assert binarize_truth(np.array([0.0, 0.001, 1.0])).tolist() == [0.0, 1.0, 1.0]
	assert not np.any(binarize_truth(np.zeros((4, 4, 1))))


def test_pin_channels_follow_layers():
	for tile in synth_generate(SynthConfig(tiles=4, tile_size=32, pin_rate=10.0, seed=2)):
		for layer in (1, 2, 3):
			has_pins = any(p.layer == layer for p in tile.pins)
			assert bool(tile.features[..., layer - 1].any()) == has_pins
		assert np.all((tile.features >= 0) & (tile.features <= 1))


def test_upper_layers_fold_into_top_slot():
	for tile in synth_generate(SynthConfig(tiles=4, tile_size=32, n_layers=4, pin_rate=24.0, seed=1)):
		for pin in tile.pins:
			slot = min(pin.layer, 3) - 1
			assert tile.features[int(pin.y0):int(pin.y1), int(pin.x0):int(pin.x1), slot].all()
		assert bool(tile.features[..., 2].any()) == any(p.layer >= 3 for p in tile.pins)
		assert bool(tile.features[..., 5].any()) == any(o.layer >= 3 for o in tile.obstacles)


def test_fold_layer_four_matches_layer_three():
	pins = [Pin(2, 2, 4, 4, layer=4, net_id=1), Pin(8, 8, 10, 10, layer=3, net_id=1)]
	features = layout_features(pins, [Obstacle(0, 0, 3, 3, layer=5)], [], 16, 5)
	assert features[3, 3, 2] == 1.0
	assert features[9, 9, 2] == 1.0
	assert features[1, 1, 5] == 1.0
	assert not features[..., [0, 1, 3, 4]].any()


def test_missing_layers_leave_slots_empty():
	for tile in synth_generate(SynthConfig(tiles=3, tile_size=32, n_layers=2, pin_rate=24.0, seed=1)):
		assert not tile.features[..., 2].any()
		assert not tile.features[..., 5].any()
		assert all(pin.layer <= 2 for pin in tile.pins)


@pytest.mark.parametrize('factor, value, expected', [(10, 0.03, 0.3), (10, 0.2, 2.0), (100, 0.03, 3.0), (1, 0.4, 0.4)])
def test_amplify_labels(factor, value, expected):
	tile = blank_tile()
	tile.label[...] = value
	amplified = amplify_labels(tile, factor)
	assert amplified.label[0, 0, 0] == pytest.approx(expected)
	assert tile.label[0, 0, 0] == value
	np.testing.assert_allclose(amplified.label / factor, tile.label, rtol=1e-15)


def test_amplify_rejects_non_positive():
	with pytest.raises(ConfigError):
		amplify_labels(blank_tile(), 0)


def test_tile_size_must_divide_by_16():
	with pytest.raises(ConfigError):
		synth_generate(SynthConfig(tiles=1, tile_size=60))


def test_rect_outside_tile_rejected():
	tile = blank_tile(pins=[Pin(10, 10, 20, 12, layer=1, net_id=1)])
	with pytest.raises(GeometryError):
		tile.validate()


def test_split_dataset_is_disjoint(micro_dataset):
	train, val, test = split_dataset(micro_dataset, 0.125, 0.125)
	assert (len(train), len(val), len(test)) == (6, 1, 1)
	assert test.tiles[0] is micro_dataset.tiles[-1]
	with pytest.raises(ConfigError):
		split_dataset(micro_dataset, 0.5, 0.5)


def test_dataset_directory(tmp_path, micro_dataset):
	splits = split_dataset(micro_dataset, 0.125, 0.125)
	save_dataset(splits, str(tmp_path))
	everything = load_dataset(str(tmp_path))
	assert len(everything) == len(micro_dataset)
	val = load_dataset(str(tmp_path), 'val')
	assert len(val) == 1
	original = splits[1].tiles[0]
	loaded = val.tiles[0]
	assert tile_stem(loaded) == tile_stem(original)
	assert np.array_equal(loaded.features, original.features)
	assert loaded.pins == original.pins
	assert val.meta == DatasetMeta(16, 3, 0)


def test_tile_stem():
	tile = blank_tile()
	tile.grid_x, tile.grid_y = 3, 12
	assert tile_stem(tile) == 'x003_y012'
	assert Dataset([tile], DatasetMeta(16, 3, 0)).layout_dims == (208, 64)
