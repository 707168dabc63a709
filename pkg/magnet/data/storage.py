import json
import logging
import os

from marshmallow import ValidationError

from magnet.data.layout import Dataset, LayoutTile
from magnet.data.npy import load_npy, save_npy
from magnet.errors import DataError, MissingDataError
from magnet.schemas import MANIFEST_VERSION, ManifestSchema

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'


def _tile_name(index, kind):
	return 'tile_{:04d}_{}.npy'.format(index, kind)


def tile_stem(tile):
	"""File stem keyed by grid position, shared by graph and prediction files."""
	return 'x{:03d}_y{:03d}'.format(tile.grid_x, tile.grid_y)


def save_dataset(splits, out_dir):
	"""Writes every tile of every split as NPY pairs plus one JSON manifest."""
	os.makedirs(out_dir, exist_ok=True)
	entries, meta = [], None
	index = 0
	for dataset in splits:
		meta = meta or dataset.meta
		for tile in dataset.tiles:
			save_npy(tile.features, os.path.join(out_dir, _tile_name(index, 'features')))
			save_npy(tile.label, os.path.join(out_dir, _tile_name(index, 'label')))
			entries.append({
				'index': index,
				'grid_x': tile.grid_x,
				'grid_y': tile.grid_y,
				'split': dataset.split,
				'features': _tile_name(index, 'features'),
				'label': _tile_name(index, 'label'),
				'n_layers': tile.n_layers,
				'pins': tile.pins,
				'obstacles': tile.obstacles,
			})
			index += 1

	manifest = ManifestSchema().dump({'version': MANIFEST_VERSION, 'meta': meta, 'tiles': entries})
	path = os.path.join(out_dir, MANIFEST_NAME)
	with open(path, 'w', encoding='utf-8') as file:
		json.dump(manifest, file, indent=1, sort_keys=True)
	logger.info('Wrote %s tiles to %s', len(entries), out_dir)
	return path


def read_manifest(data_dir):
	path = os.path.join(data_dir, MANIFEST_NAME)
	if not os.path.isfile(path):
		raise MissingDataError(object='Dataset manifest', path=path)
	with open(path, encoding='utf-8') as file:
		try:
			manifest = ManifestSchema().load(json.load(file))
		except (ValidationError, ValueError) as error:
			raise DataError(source=getattr(error, 'messages', None), message='invalid manifest {}: {}'.format(path, error))
	if manifest['version'] != MANIFEST_VERSION:
		raise DataError(message='unsupported manifest version {}'.format(manifest['version']))
	return manifest


def load_dataset(data_dir, split=None):
	"""Loads the tiles of one split (or all tiles when `split` is None)."""
	manifest = read_manifest(data_dir)
	tiles = []
	for entry in manifest['tiles']:
		if split is not None and entry['split'] != split:
			continue
		tile = LayoutTile(
			grid_x=entry['grid_x'],
			grid_y=entry['grid_y'],
			features=load_npy(os.path.join(data_dir, entry['features'])),
			label=load_npy(os.path.join(data_dir, entry['label'])),
			pins=entry['pins'],
			obstacles=entry['obstacles'],
			n_layers=entry['n_layers'],
		)
		tile.validate()
		tiles.append(tile)
	return Dataset(tiles, manifest['meta'], split or 'all')
