"""
Neural primitives over channels-last tensors.

Feature maps are H x W x C, conv kernels k x k x C_in x C_out. Every op
returns a Tensor wired into the backward graph.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from magnet.errors import ShapeError
from magnet.tensor.core import Tensor, as_tensor, note_branch


def _require_map(op, x, channels=None):
	if x.ndim != 3:
		raise ShapeError(op=op, message='expected an H x W x C map, got shape {}'.format(x.shape))
	if min(x.shape[:2]) <= 0:
		raise ShapeError(op=op, message='non-positive spatial dims {}'.format(x.shape[:2]))
	if channels is not None and x.shape[2] != channels:
		raise ShapeError(op=op, message='channel mismatch: input has {}, expected {}'.format(x.shape[2], channels))


def _im2col(data, k, stride, pad):
	padded = np.pad(data, ((pad, pad), (pad, pad), (0, 0)))
	windows = sliding_window_view(padded, (k, k), axis=(0, 1))[::stride, ::stride]
	out_h, out_w = windows.shape[:2]
	cols = windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, -1)
	return cols, out_h, out_w


def _col2im(dcols, shape, k, stride, pad, out_h, out_w):
	h, w, c = shape
	dcols = dcols.reshape(out_h, out_w, k, k, c)
	padded = np.zeros((h + 2 * pad, w + 2 * pad, c))
	for dy in range(k):
		for dx in range(k):
			padded[dy:dy + stride * out_h:stride, dx:dx + stride * out_w:stride] += dcols[:, :, dy, dx]
	return padded[pad:pad + h, pad:pad + w]


def conv2d(x, kernel, bias=None, padding='same', stride=1):
	kh, kw, c_in, c_out = kernel.shape
	_require_map('conv2d', x, c_in)
	if kh != kw or kh % 2 == 0:
		raise ShapeError(op='conv2d', message='kernel must be square with odd size, got {}x{}'.format(kh, kw))
	if stride < 1:
		raise ShapeError(op='conv2d', message='stride must be >= 1, got {}'.format(stride))
	if padding == 'same':
		pad = kh // 2
	elif padding == 'valid':
		pad = 0
	else:
		raise ShapeError(op='conv2d', message='unknown padding {!r}'.format(padding))
	if min(x.shape[:2]) + 2 * pad < kh:
		raise ShapeError(op='conv2d', message='input {} smaller than kernel {}'.format(x.shape[:2], kh))

	cols, out_h, out_w = _im2col(x.data, kh, stride, pad)
	weights = kernel.data.reshape(-1, c_out)
	out = cols @ weights
	if bias is not None:
		out = out + bias.data
	in_shape = x.shape

	def grad_fn(grad):
		flat = grad.reshape(-1, c_out)
		g_input = _col2im(flat @ weights.T, in_shape, kh, stride, pad, out_h, out_w)
		g_kernel = (cols.T @ flat).reshape(kernel.shape)
		return g_input, g_kernel, flat.sum(axis=0)

	parents = (x, kernel) if bias is None else (x, kernel, bias)
	return Tensor.from_op(out.reshape(out_h, out_w, c_out), parents, grad_fn)


def transposed_conv2d(x, kernel, bias=None, stride=2):
	"""Upsamples by `stride`; the overlap of a k > stride kernel is cropped symmetrically."""
	k, kw, c_in, c_out = kernel.shape
	_require_map('transposed_conv2d', x, c_in)
	if stride != 2:
		raise ShapeError(op='transposed_conv2d', message='stride must be 2, got {}'.format(stride))
	if k != kw or k < stride:
		raise ShapeError(op='transposed_conv2d', message='kernel must be square with size >= stride')

	h, w = x.shape[:2]
	full_h, full_w = (h - 1) * stride + k, (w - 1) * stride + k
	offset = (k - stride) // 2
	x_flat = x.data.reshape(-1, c_in)
	weights = kernel.data.transpose(2, 0, 1, 3).reshape(c_in, -1)
	contrib = (x_flat @ weights).reshape(h, w, k, k, c_out)

	full = np.zeros((full_h, full_w, c_out))
	for dy in range(k):
		for dx in range(k):
			full[dy:dy + stride * h:stride, dx:dx + stride * w:stride] += contrib[:, :, dy, dx]
	out = full[offset:offset + stride * h, offset:offset + stride * w]
	if bias is not None:
		out = out + bias.data

	def grad_fn(grad):
		g_full = np.zeros((full_h, full_w, c_out))
		g_full[offset:offset + stride * h, offset:offset + stride * w] = grad
		g_contrib = np.empty((h, w, k, k, c_out))
		for dy in range(k):
			for dx in range(k):
				g_contrib[:, :, dy, dx] = g_full[dy:dy + stride * h:stride, dx:dx + stride * w:stride]
		g_contrib = g_contrib.reshape(h * w, -1)
		g_input = (g_contrib @ weights.T).reshape(h, w, c_in)
		g_kernel = (x_flat.T @ g_contrib).reshape(c_in, k, k, c_out).transpose(1, 2, 0, 3)
		return g_input, g_kernel, grad.sum(axis=(0, 1))

	parents = (x, kernel) if bias is None else (x, kernel, bias)
	return Tensor.from_op(out, parents, grad_fn)


def max_pool2(x):
	_require_map('max_pool2', x)
	h, w, c = x.shape
	if h % 2 or w % 2:
		raise ShapeError(op='max_pool2', message='spatial dims must be even, got {}x{}'.format(h, w))
	blocks = x.data.reshape(h // 2, 2, w // 2, 2, c).transpose(0, 2, 4, 1, 3).reshape(h // 2, w // 2, c, 4)
	winner = blocks.argmax(axis=-1)[..., None]
	note_branch(winner)
	out = np.take_along_axis(blocks, winner, axis=-1)[..., 0]

	def grad_fn(grad):
		g_blocks = np.zeros_like(blocks)
		np.put_along_axis(g_blocks, winner, grad[..., None], axis=-1)
		return (g_blocks.reshape(h // 2, w // 2, c, 2, 2).transpose(0, 3, 1, 4, 2).reshape(h, w, c),)

	return Tensor.from_op(out, (x,), grad_fn)


def avg_pool(x, factor):
	_require_map('avg_pool', x)
	h, w, c = x.shape
	if factor < 1 or h % factor or w % factor:
		raise ShapeError(op='avg_pool', message='{}x{} not divisible by factor {}'.format(h, w, factor))
	out = x.data.reshape(h // factor, factor, w // factor, factor, c).mean(axis=(1, 3))

	def grad_fn(grad):
		return (np.repeat(np.repeat(grad, factor, axis=0), factor, axis=1) / (factor * factor),)

	return Tensor.from_op(out, (x,), grad_fn)


def global_avg_pool(x):
	_require_map('global_avg_pool', x)
	h, w, c = x.shape

	def grad_fn(grad):
		return (np.broadcast_to(grad, (h, w, c)) / (h * w),)

	return Tensor.from_op(x.data.mean(axis=(0, 1), keepdims=True), (x,), grad_fn)


def channel_stat_maps(x):
	"""Stacks the per-pixel channel max (channel 0) and channel mean (channel 1)."""
	_require_map('channel_stat_maps', x)
	c = x.shape[2]
	winner = x.data.argmax(axis=-1)[..., None]
	note_branch(winner)
	max_map = np.take_along_axis(x.data, winner, axis=-1)
	avg_map = x.data.mean(axis=-1, keepdims=True)

	def grad_fn(grad):
		g_input = np.broadcast_to(grad[..., 1:2] / c, x.shape).copy()
		np.put_along_axis(g_input, winner, np.take_along_axis(g_input, winner, axis=-1) + grad[..., 0:1], axis=-1)
		return (g_input,)

	return Tensor.from_op(np.concatenate([max_map, avg_map], axis=-1), (x,), grad_fn)


def channel_mean_map(x):
	_require_map('channel_mean_map', x)
	c = x.shape[2]

	def grad_fn(grad):
		return (np.broadcast_to(grad / c, x.shape),)

	return Tensor.from_op(x.data.mean(axis=-1, keepdims=True), (x,), grad_fn)


def linear(x, weight, bias=None):
	"""Affine map over the last axis of a vector or a stack of row vectors."""
	m, n = weight.shape
	if x.ndim not in (1, 2) or x.shape[-1] != n:
		raise ShapeError(op='linear', message='input {} does not match weight {}'.format(x.shape, weight.shape))
	if bias is not None and bias.shape != (m,):
		raise ShapeError(op='linear', message='bias {} does not match weight {}'.format(bias.shape, weight.shape))
	out = x.data @ weight.data.T
	if bias is not None:
		out = out + bias.data
	inputs = x.data

	def grad_fn(grad):
		if inputs.ndim == 1:
			return grad @ weight.data, np.outer(grad, inputs), grad
		return grad @ weight.data, grad.T @ inputs, grad.sum(axis=0)

	parents = (x, weight) if bias is None else (x, weight, bias)
	return Tensor.from_op(out, parents, grad_fn)


def relu(x):
	mask = x.data > 0
	note_branch(mask)
	return Tensor.from_op(np.where(mask, x.data, 0.0), (x,), lambda grad: (grad * mask,))


def _sigmoid(z):
	positive = z >= 0
	exp = np.exp(np.where(positive, -z, z))
	return np.where(positive, 1.0 / (1.0 + exp), exp / (1.0 + exp))


def sigmoid(x):
	out = _sigmoid(x.data)
	return Tensor.from_op(out, (x,), lambda grad: (grad * out * (1.0 - out),))


def concatenate(tensors, axis=-1):
	tensors = [as_tensor(t) for t in tensors]
	sizes = [t.shape[axis] for t in tensors]
	bounds = np.cumsum(sizes)[:-1]

	def grad_fn(grad):
		return tuple(np.split(grad, bounds, axis=axis))

	return Tensor.from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, grad_fn)


def concat_channels(a, b):
	_require_map('concat_channels', a)
	_require_map('concat_channels', b)
	if a.shape[:2] != b.shape[:2]:
		raise ShapeError(op='concat_channels', message='spatial mismatch {} vs {}'.format(a.shape[:2], b.shape[:2]))
	return concatenate([a, b], axis=-1)


def split_channels(x, sizes):
	if sum(sizes) != x.shape[-1]:
		raise ShapeError(op='split_channels', message='sizes {} do not sum to {}'.format(sizes, x.shape[-1]))
	parts, start = [], 0
	for size in sizes:
		parts.append(x[..., start:start + size])
		start += size
	return parts


def scale_channels(f, a):
	_require_map('scale_channels', f)
	if a.shape != (1, 1, f.shape[2]):
		raise ShapeError(op='scale_channels', message='scale {} does not match map {}'.format(a.shape, f.shape))
	return f * a


def scale_spatial(f, m):
	_require_map('scale_spatial', f)
	if m.shape != f.shape[:2] + (1,):
		raise ShapeError(op='scale_spatial', message='mask {} does not match map {}'.format(m.shape, f.shape))
	return f * m


def gather_rows(x, index):
	return x[np.asarray(index, dtype=np.int64)]


def scatter_add_rows(x, index, count):
	"""Sums rows of `x` into `count` buckets; rows are added in the order given."""
	index = np.asarray(index, dtype=np.int64)
	out = np.zeros((count,) + x.shape[1:])
	np.add.at(out, index, x.data)

	def grad_fn(grad):
		return (grad[index],)

	return Tensor.from_op(out, (x,), grad_fn)


def scatter_mean(values, index, size):
	"""Averages scalars landing in the same bucket; empty buckets stay zero."""
	index = np.asarray(index, dtype=np.int64)
	if values.shape != index.shape:
		raise ShapeError(op='scatter_mean', message='values {} vs index {}'.format(values.shape, index.shape))
	counts = np.bincount(index, minlength=size).astype(np.float64)
	sums = np.bincount(index, weights=values.data, minlength=size)
	out = sums / np.maximum(counts, 1.0)

	def grad_fn(grad):
		return (grad[index] / counts[index],)

	return Tensor.from_op(out, (values,), grad_fn)


def mse_loss(pred, target):
	target = np.asarray(target, dtype=np.float64)
	if pred.shape != target.shape:
		raise ShapeError(op='mse_loss', message='prediction {} vs target {}'.format(pred.shape, target.shape))
	diff = pred - Tensor(target)
	return (diff * diff).mean()


def bce_loss(pred, target, eps=1e-12):
	target = np.asarray(target, dtype=np.float64)
	if pred.shape != target.shape:
		raise ShapeError(op='bce_loss', message='prediction {} vs target {}'.format(pred.shape, target.shape))
	p = np.clip(pred.data, eps, 1.0 - eps)
	value = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))

	def grad_fn(grad):
		return (grad * (p - target) / (p * (1.0 - p)) / p.size,)

	return Tensor.from_op(value, (pred,), grad_fn)
