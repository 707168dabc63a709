"""
Pixel-level scores between a ground-truth map and a prediction.

Maps may be H x W or H x W x 1; a trailing singleton channel is dropped.
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from magnet.errors import ShapeError, UndefinedRangeError
from magnet.tensor.core import Tensor

SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_array(values):
	if isinstance(values, Tensor):
		return values.data
	return np.asarray(values, dtype=np.float64)


def _plane(values, op):
	data = _as_array(values)
	if data.ndim == 3 and data.shape[2] == 1:
		data = data[..., 0]
	if data.ndim != 2:
		raise ShapeError(op=op, message='expected a 2-D map, got shape {}'.format(data.shape))
	return data


def _pair(a, b, op):
	a, b = _plane(a, op), _plane(b, op)
	if a.shape != b.shape:
		raise ShapeError(op=op, message='shape mismatch {} vs {}'.format(a.shape, b.shape))
	return a, b


def nrmse(truth, pred):
	truth, pred = _pair(truth, pred, 'nrmse')
	value_range = truth.max() - truth.min()
	if value_range == 0:
		raise UndefinedRangeError(value=float(truth.max()))
	return float(np.sqrt(np.mean((truth - pred) ** 2)) / value_range)


def nrmse_or_unit_range(truth, pred):
	"""NRMSE falling back to a range of 1 for constant truth; second item flags the fallback."""
	try:
		return nrmse(truth, pred), False
	except UndefinedRangeError:
		truth, pred = _pair(truth, pred, 'nrmse')
		return float(np.sqrt(np.mean((truth - pred) ** 2))), True


def ssim(x, y, win=SSIM_WINDOW, data_range=1.0):
	"""Mean SSIM over every valid win x win box window."""
	x, y = _pair(x, y, 'ssim')
	if min(x.shape) < win:
		raise ShapeError(op='ssim', message='image {} smaller than the {}x{} window'.format(x.shape, win, win))
	c1 = (SSIM_K1 * data_range) ** 2
	c2 = (SSIM_K2 * data_range) ** 2

	wx = sliding_window_view(x, (win, win))
	wy = sliding_window_view(y, (win, win))
	mu_x = wx.mean(axis=(-2, -1))
	mu_y = wy.mean(axis=(-2, -1))
	var_x = ((wx - mu_x[..., None, None]) ** 2).mean(axis=(-2, -1))
	var_y = ((wy - mu_y[..., None, None]) ** 2).mean(axis=(-2, -1))
	cov = ((wx - mu_x[..., None, None]) * (wy - mu_y[..., None, None])).mean(axis=(-2, -1))

	numerator = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
	denominator = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
	return float(np.mean(numerator / denominator))


@dataclass(frozen=True)
class ConfusionCounts:
	tp: int = 0
	fp: int = 0
	tn: int = 0
	fn: int = 0

	@property
	def total(self):
		return self.tp + self.fp + self.tn + self.fn

	def __add__(self, other):
		return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)


def confusion(pred_bin, truth_bin):
	pred, truth = _pair(pred_bin, truth_bin, 'confusion')
	pred, truth = pred > 0.5, truth > 0.5
	return ConfusionCounts(
		tp=int(np.count_nonzero(pred & truth)),
		fp=int(np.count_nonzero(pred & ~truth)),
		tn=int(np.count_nonzero(~pred & ~truth)),
		fn=int(np.count_nonzero(~pred & truth)),
	)


@dataclass(frozen=True)
class Rates:
	tpr: float
	fpr: float
	precision: float
	f1: float
	accuracy: float
	degenerate: Tuple[str, ...] = field(default_factory=tuple)


def _ratio(numerator, denominator, name, flags):
	if denominator == 0:
		flags.append(name)
		return 0.0
	return numerator / denominator


def rates(c):
	flags = []
	tpr = _ratio(c.tp, c.tp + c.fn, 'tpr', flags)
	fpr = _ratio(c.fp, c.fp + c.tn, 'fpr', flags)
	precision = _ratio(c.tp, c.tp + c.fp, 'precision', flags)
	f1 = _ratio(2 * precision * tpr, precision + tpr, 'f1', flags)
	accuracy = _ratio(c.tp + c.tn, c.total, 'accuracy', flags)
	return Rates(tpr, fpr, precision, f1, accuracy, tuple(flags))


def is_single_class(truth_bin):
	truth = np.asarray(truth_bin) > 0.5
	return truth.all() or not truth.any()


def auc(prob_map, truth_bin):
	"""
	Trapezoidal area under the ROC curve, one point per distinct score.
	Single-class truth gives 0.5 (see `is_single_class`).
	"""
	scores = _as_array(prob_map).reshape(-1)
	truth = _as_array(truth_bin).reshape(-1) > 0.5
	if scores.shape != truth.shape:
		raise ShapeError(op='auc', message='{} scores vs {} labels'.format(scores.size, truth.size))
	positives = int(truth.sum())
	negatives = truth.size - positives
	if positives == 0 or negatives == 0:
		return 0.5

	order = np.argsort(-scores, kind='mergesort')
	scores, truth = scores[order], truth[order]
	last_of_run = np.r_[np.flatnonzero(np.diff(scores)), scores.size - 1]
	tp = np.cumsum(truth)[last_of_run]
	fp = (last_of_run + 1) - tp
	tpr = np.r_[0.0, tp / positives]
	fpr = np.r_[0.0, fp / negatives]
	return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
