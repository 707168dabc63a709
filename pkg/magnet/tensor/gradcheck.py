"""
Central finite-difference checks for the autodiff engine.

A check projects the op output onto a fixed random tensor, so every output
element contributes to the scalar whose gradient is compared.
"""
import logging
from collections import namedtuple

import numpy as np

from magnet.errors import GradcheckFailedError
from magnet.tensor import ops
from magnet.tensor.core import Parameter, Tensor, backward, no_grad, record_branches

logger = logging.getLogger(__name__)

CheckResult = namedtuple('CheckResult', ['name', 'seed', 'max_rel_error', 'tolerance', 'passed'])
RegisteredCheck = namedtuple('RegisteredCheck', ['builder', 'tolerance', 'h', 'max_entries'])

PRIMITIVE_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4

_registry = {}


def relative_error(analytic, numeric, floor=1e-10):
	scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0), floor)
	return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)


def _pick_entries(size, max_entries, rng):
	if max_entries is None or size <= max_entries:
		return np.arange(size)
	return np.sort(rng.choice(size, size=max_entries, replace=False))


def _same_branches(a, b):
	return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def gradcheck(fn, inputs, h=1e-5, max_entries=None, seed=0, retries=2):
	"""
	Returns the worst relative error between backward() gradients and central
	differences over every requires_grad tensor in `inputs`.

	When a perturbation flips a ReLU mask or a pooling winner, the step is
	shrunk tenfold up to `retries` times; entries that still straddle a kink
	are left out of the comparison.
	"""
	rng = np.random.default_rng(seed)
	for tensor in inputs:
		tensor.zero_grad()
	out = fn(*inputs)
	projection = rng.uniform(-1.0, 1.0, size=out.shape)
	backward((out * Tensor(projection)).sum())

	def objective():
		with no_grad(), record_branches() as branches:
			value = float(np.sum(fn(*inputs).data * projection))
		return value, branches

	_, reference = objective()
	worst = 0.0
	skipped = 0
	for tensor in inputs:
		if not tensor.requires_grad:
			continue
		analytic = tensor.grad.reshape(-1) if tensor.grad is not None else np.zeros(tensor.size)
		flat = tensor.data.reshape(-1)
		entries = _pick_entries(tensor.size, max_entries, rng)
		kept, numeric = [], []
		for entry in entries:
			original = flat[entry]
			step = h
			for _ in range(retries + 1):
				flat[entry] = original + step
				plus, plus_branches = objective()
				flat[entry] = original - step
				minus, minus_branches = objective()
				flat[entry] = original
				if _same_branches(plus_branches, reference) and _same_branches(minus_branches, reference):
					kept.append(entry)
					numeric.append((plus - minus) / (2.0 * step))
					break
				step /= 10.0
			else:
				skipped += 1
		if kept:
			worst = max(worst, relative_error(analytic[kept], np.array(numeric)))
	if skipped:
		logger.debug('Gradient check skipped %s entries sitting on a kink', skipped)
	return worst


def register(name, tolerance=PRIMITIVE_TOLERANCE, h=1e-5, max_entries=None):
	"""
	Registers a builder `rng -> (fn, inputs)`. Network-sized checks pass an
	entry cap so every seed stays fast.
	"""
	def decor(builder):
		_registry[name] = RegisteredCheck(builder, tolerance, h, max_entries)
		return builder

	return decor


def registered_checks():
	return dict(_registry)


def run_checks(seeds, names=None, max_entries=64):
	results = []
	for name, check in sorted(_registry.items()):
		if names and name not in names:
			continue
		for seed in seeds:
			rng = np.random.default_rng(seed)
			fn, inputs = check.builder(rng)
			limit = check.max_entries or max_entries
			error = gradcheck(fn, inputs, h=check.h, max_entries=limit, seed=seed)
			tolerance = check.tolerance
			passed = error < tolerance
			if not passed:
				logger.error('Gradient check %s (seed %s) failed: %.3e >= %.1e', name, seed, error, tolerance)
			results.append(CheckResult(name, seed, error, tolerance, passed))
	return results


def raise_on_failure(results):
	failed = [result for result in results if not result.passed]
	if failed:
		raise GradcheckFailedError(
			source=[result._asdict() for result in failed], failed=len(failed), total=len(results),
		)


def _param(rng, shape):
	return Parameter(rng.uniform(-1.0, 1.0, size=shape))


def _away_from_zero(rng, shape):
	magnitude = rng.uniform(0.1, 1.0, size=shape)
	return Parameter(magnitude * rng.choice([-1.0, 1.0], size=shape))


@register('conv2d')
def _conv2d(rng):
	return (lambda x, k, b: ops.conv2d(x, k, b)), [_param(rng, (4, 4, 2)), _param(rng, (3, 3, 2, 3)), _param(rng, (3,))]


@register('conv2d_stride2_valid')
def _conv2d_strided(rng):
	return (lambda x, k: ops.conv2d(x, k, padding='valid', stride=2)), [_param(rng, (7, 7, 2)), _param(rng, (3, 3, 2, 2))]


@register('transposed_conv2d')
def _transposed_conv2d(rng):
	fn = lambda x, k, b: ops.transposed_conv2d(x, k, b)
	return fn, [_param(rng, (3, 3, 2)), _param(rng, (2, 2, 2, 3)), _param(rng, (3,))]


@register('max_pool2')
def _max_pool2(rng):
	return ops.max_pool2, [_param(rng, (4, 4, 2))]


@register('avg_pool')
def _avg_pool(rng):
	return (lambda x: ops.avg_pool(x, 2)), [_param(rng, (4, 4, 2))]


@register('global_avg_pool')
def _global_avg_pool(rng):
	return ops.global_avg_pool, [_param(rng, (3, 4, 2))]


@register('channel_stat_maps')
def _channel_stat_maps(rng):
	return ops.channel_stat_maps, [_param(rng, (3, 3, 4))]


@register('linear')
def _linear(rng):
	return ops.linear, [_param(rng, (5, 4)), _param(rng, (3, 4)), _param(rng, (3,))]


@register('relu')
def _relu(rng):
	return ops.relu, [_away_from_zero(rng, (3, 3, 2))]


@register('sigmoid')
def _sigmoid(rng):
	return ops.sigmoid, [_param(rng, (3, 3, 2))]


@register('concat_channels')
def _concat_channels(rng):
	return ops.concat_channels, [_param(rng, (3, 3, 2)), _param(rng, (3, 3, 1))]


@register('scale_channels')
def _scale_channels(rng):
	return ops.scale_channels, [_param(rng, (3, 3, 2)), _param(rng, (1, 1, 2))]


@register('scale_spatial')
def _scale_spatial(rng):
	return ops.scale_spatial, [_param(rng, (3, 3, 2)), _param(rng, (3, 3, 1))]


@register('scatter_mean')
def _scatter_mean(rng):
	index = rng.integers(0, 4, size=6)
	return (lambda v: ops.scatter_mean(v, index, 5)), [_param(rng, (6,))]


@register('scatter_add_rows')
def _scatter_add_rows(rng):
	index = rng.integers(0, 3, size=5)
	return (lambda x: ops.scatter_add_rows(ops.gather_rows(x, index), index, 3)), [_param(rng, (3, 4))]


@register('bce_loss')
def _bce_loss(rng):
	target = (rng.uniform(size=(3, 3, 1)) > 0.5).astype(np.float64)
	return (lambda z: ops.bce_loss(ops.sigmoid(z), target)), [_param(rng, (3, 3, 1))]


@register('conv_relu_pool_linear')
def _composite(rng):
	def fn(x, k, w, b):
		pooled = ops.max_pool2(ops.relu(ops.conv2d(x, k)))
		return ops.linear(pooled.reshape(-1), w, b)

	return fn, [_param(rng, (4, 4, 2)), _param(rng, (3, 3, 2, 2)), _param(rng, (3, 8)), _param(rng, (3,))]
