import json
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from magnet.data.layout import binarize_truth
from magnet.errors import MissingDataError, ShapeError
from magnet.metrics.scores import ConfusionCounts, auc, confusion, is_single_class, nrmse_or_unit_range, rates, ssim
from magnet.schemas import ComparisonSchema, EvalReportSchema

logger = logging.getLogger(__name__)

COLUMNS = ('avg_nrmse', 'avg_ssim', 'tpr', 'fpr', 'precision', 'f1', 'accuracy', 'auc')


@dataclass
class TileScore:
	index: int
	nrmse: float
	ssim: float
	tp: int
	fp: int
	tn: int
	fn: int


@dataclass
class EvalReport:
	threshold: float
	avg_nrmse: float
	avg_ssim: float
	tpr: float
	fpr: float
	precision: float
	f1: float
	accuracy: float
	auc: float
	degenerate: Tuple[str, ...] = field(default_factory=tuple)
	per_tile: List[TileScore] = field(default_factory=list)

	def to_dict(self):
		return EvalReportSchema().dump(self)


@dataclass
class Comparison:
	unet: EvalReport
	magnet: EvalReport

	@property
	def fpr_delta(self):
		return self.magnet.fpr - self.unet.fpr

	@property
	def tpr_delta(self):
		return self.magnet.tpr - self.unet.tpr

	def to_dict(self):
		return ComparisonSchema().dump(self)


def evaluate(dataset, predictions, threshold=0.1):
	"""
	Scores probability maps against the tile labels.

	`predictions` is a sequence aligned with the dataset tiles or a mapping
	from tile position to map. NRMSE and SSIM are averaged over tiles; the
	confusion counts are summed over all pixels before the rates are taken.
	"""
	tiles = list(dataset)
	if isinstance(predictions, dict):
		lookup = predictions
	else:
		lookup = dict(enumerate(predictions))

	per_tile = []
	total = ConfusionCounts()
	flags = set()
	scores, truths = [], []
	for index, tile in enumerate(tiles):
		if index not in lookup:
			raise MissingDataError(object='prediction for tile {}'.format(index), path='<predictions>')
		prob = np.asarray(lookup[index], dtype=np.float64)
		if prob.shape != tile.label.shape:
			raise ShapeError(op='evaluate', message='tile {}: prediction {} vs label {}'.format(index, prob.shape, tile.label.shape))
		truth_bin = binarize_truth(tile.label)
		pred_bin = (prob >= threshold).astype(np.float64)

		tile_nrmse, fallback = nrmse_or_unit_range(tile.label, prob)
		if fallback:
			flags.add('nrmse_unit_range')
		counts = confusion(pred_bin, truth_bin)
		total = total + counts
		per_tile.append(TileScore(index, tile_nrmse, ssim(tile.label, prob), counts.tp, counts.fp, counts.tn, counts.fn))
		scores.append(prob.reshape(-1))
		truths.append(truth_bin.reshape(-1))

	if not per_tile:
		raise MissingDataError(object='tiles', path='<dataset>')

	result = rates(total)
	flags.update(result.degenerate)
	all_truth = np.concatenate(truths)
	if is_single_class(all_truth):
		flags.add('auc')

	report = EvalReport(
		threshold=threshold,
		avg_nrmse=float(np.mean([score.nrmse for score in per_tile])),
		avg_ssim=float(np.mean([score.ssim for score in per_tile])),
		tpr=result.tpr,
		fpr=result.fpr,
		precision=result.precision,
		f1=result.f1,
		accuracy=result.accuracy,
		auc=auc(np.concatenate(scores), all_truth),
		degenerate=tuple(sorted(flags)),
		per_tile=per_tile,
	)
	logger.info('Evaluated %s tiles: FPR %.4f, TPR %.4f, F1 %.4f', len(per_tile), report.fpr, report.tpr, report.f1)
	return report


def render_table(report):
	"""Aligned two-row text table of the summary columns."""
	values = ['{:.4f}'.format(getattr(report, column)) for column in COLUMNS]
	widths = [max(len(column), len(value)) for column, value in zip(COLUMNS, values)]
	header = '  '.join(column.rjust(width) for column, width in zip(COLUMNS, widths))
	row = '  '.join(value.rjust(width) for value, width in zip(values, widths))
	lines = [header, row]
	if report.degenerate:
		lines.append('degenerate: {}'.format(', '.join(report.degenerate)))
	return '\n'.join(lines) + '\n'


def render_comparison(comparison):
	lines = []
	for name, report in (('md-unet', comparison.unet), ('magnet', comparison.magnet)):
		lines.append('[{}]'.format(name))
		lines.append(render_table(report))
	lines.append('fpr_delta {:+.4f}  tpr_delta {:+.4f}\n'.format(comparison.fpr_delta, comparison.tpr_delta))
	return '\n'.join(lines)


def write_json(data, path):
	with open(path, 'w', encoding='utf-8') as file:
		json.dump(data, file, indent=1, sort_keys=True)
