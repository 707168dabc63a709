import numpy as np

from magnet.tensor import ops
from magnet.tensor.core import Parameter
from magnet.tensor.init import conv_kernel, he_normal, linear_weight, zeros


class Module:
	"""
	Parameter container walked by attribute order.

	Attributes starting with an underscore are not walked, which is how a
	module borrows another module's parameters without owning them.
	"""

	def _walk(self, prefix, seen):
		for name, value in vars(self).items():
			if name.startswith('_'):
				continue
			path = '{}.{}'.format(prefix, name) if prefix else name
			yield from _walk_value(path, value, seen)

	def named_parameters(self, prefix=''):
		return list(self._walk(prefix, set()))

	def parameters(self):
		return [param for _, param in self.named_parameters()]

	def bind_names(self, prefix=''):
		for name, param in self.named_parameters(prefix):
			param.name = name
		return self

	def freeze(self, frozen=True):
		for param in self.parameters():
			param.frozen = frozen

	def zero_grad(self):
		for param in self.parameters():
			param.zero_grad()

	def state(self, prefix=''):
		return {name: param.data.copy() for name, param in self.named_parameters(prefix)}


def _walk_value(path, value, seen):
	if isinstance(value, Parameter):
		if id(value) not in seen:
			seen.add(id(value))
			yield path, value
	elif isinstance(value, Module):
		yield from value._walk(path, seen)
	elif isinstance(value, (list, tuple)):
		for index, item in enumerate(value):
			yield from _walk_value('{}.{}'.format(path, index), item, seen)


class Conv(Module):
	def __init__(self, rng, k, c_in, c_out, bias=True):
		self.kernel = conv_kernel(rng, k, c_in, c_out)
		self.bias = zeros((c_out,)) if bias else None

	@property
	def channels(self):
		return self.kernel.shape[2], self.kernel.shape[3]

	def __call__(self, x):
		return ops.conv2d(x, self.kernel, self.bias)


class UpConv(Module):
	def __init__(self, rng, c_in, c_out, k=2):
		self.kernel = he_normal(rng, (k, k, c_in, c_out), fan_in=k * k * c_in)
		self.bias = zeros((c_out,))

	def __call__(self, x):
		return ops.transposed_conv2d(x, self.kernel, self.bias)


class Linear(Module):
	def __init__(self, rng, n_in, n_out, bias=True):
		self.weight = linear_weight(rng, n_out, n_in)
		self.bias = zeros((n_out,)) if bias else None

	def __call__(self, x):
		return ops.linear(x, self.weight, self.bias)


class MLP(Module):
	"""Linear layers with ReLU between them and none after the last."""

	def __init__(self, rng, sizes):
		self.layers = [Linear(rng, n_in, n_out) for n_in, n_out in zip(sizes[:-1], sizes[1:])]

	@property
	def in_features(self):
		return self.layers[0].weight.shape[1]

	def __call__(self, x):
		for index, layer in enumerate(self.layers):
			x = layer(x)
			if index < len(self.layers) - 1:
				x = ops.relu(x)
		return x


def set_all(module, value):
	"""Overwrites every parameter with a constant; handy for degenerate-case checks."""
	for param in module.parameters():
		param.data[...] = value
	return module


def count_parameters(module):
	return int(sum(np.prod(param.shape) for param in module.parameters()))
