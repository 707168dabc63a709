import logging
import threading
from contextlib import contextmanager

import numpy as np

from magnet.errors import ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()


def is_grad_enabled():
	return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
	"""
	Disables tape recording for the current thread.

	Forward passes inside the block build no backward graph, so read-only
	inference over disjoint inputs can run on several threads at once.
	"""
	previous = is_grad_enabled()
	_state.grad_enabled = False
	try:
		yield
	finally:
		_state.grad_enabled = previous


@contextmanager
def record_branches():
	"""Collects the branch decisions (ReLU masks, pooling winners) ops take inside the block."""
	log = []
	previous = getattr(_state, 'branches', None)
	_state.branches = log
	try:
		yield log
	finally:
		_state.branches = previous


def note_branch(decision):
	log = getattr(_state, 'branches', None)
	if log is not None:
		log.append(decision)


def _unbroadcast(grad, shape):
	while grad.ndim > len(shape):
		grad = grad.sum(axis=0)
	for axis, size in enumerate(shape):
		if size == 1 and grad.shape[axis] != 1:
			grad = grad.sum(axis=axis, keepdims=True)
	return grad


def _is_basic_index(index):
	items = index if isinstance(index, tuple) else (index,)
	return all(isinstance(item, (slice, int, type(Ellipsis), type(None))) for item in items)


class Tensor:
	"""
	Dense float64 array taking part in reverse-mode differentiation.

	Every op result keeps references to its parents and a closure mapping the
	output gradient to one gradient per parent. `backward` walks that graph
	in reverse topological order.
	"""

	def __init__(self, data, requires_grad=False):
		self.data = np.array(data, dtype=np.float64)
		self.requires_grad = bool(requires_grad)
		self.grad = None
		self._parents = ()
		self._backward = None

	@classmethod
	def from_op(cls, data, parents, backward):
		out = Tensor.__new__(Tensor)
		out.data = np.asarray(data, dtype=np.float64)
		out.grad = None
		recording = is_grad_enabled() and any(parent.requires_grad for parent in parents)
		out.requires_grad = recording
		out._parents = tuple(parents) if recording else ()
		out._backward = backward if recording else None
		return out

	@property
	def shape(self):
		return self.data.shape

	@property
	def ndim(self):
		return self.data.ndim

	@property
	def size(self):
		return self.data.size

	def numpy(self):
		return self.data.copy()

	def item(self):
		return float(self.data.reshape(-1)[0])

	def zero_grad(self):
		self.grad = None

	def backward(self):
		backward(self)

	def _accumulate(self, grad):
		if self.grad is None:
			self.grad = np.array(grad, dtype=np.float64).reshape(self.data.shape)
		else:
			self.grad += grad

	def __repr__(self):
		return 'Tensor(shape={}, requires_grad={})'.format(self.shape, self.requires_grad)

	def __add__(self, other):
		other = as_tensor(other)
		a_shape, b_shape = self.shape, other.shape

		def grad_fn(grad):
			return _unbroadcast(grad, a_shape), _unbroadcast(grad, b_shape)

		return Tensor.from_op(self.data + other.data, (self, other), grad_fn)

	__radd__ = __add__

	def __neg__(self):
		return Tensor.from_op(-self.data, (self,), lambda grad: (-grad,))

	def __sub__(self, other):
		return self + (-as_tensor(other))

	def __rsub__(self, other):
		return as_tensor(other) + (-self)

	def __mul__(self, other):
		other = as_tensor(other)
		a, b = self.data, other.data

		def grad_fn(grad):
			return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)

		return Tensor.from_op(a * b, (self, other), grad_fn)

	__rmul__ = __mul__

	def __truediv__(self, scalar):
		if isinstance(scalar, Tensor):
			raise ShapeError(op='div', message='only scalar divisors are supported')
		return self * (1.0 / float(scalar))

	def __getitem__(self, index):
		shape = self.shape

		def grad_fn(grad):
			full = np.zeros(shape)
			if _is_basic_index(index):
				full[index] += grad
			else:
				np.add.at(full, index, grad)
			return (full,)

		return Tensor.from_op(self.data[index], (self,), grad_fn)

	def sum(self):
		shape = self.shape
		return Tensor.from_op(self.data.sum(), (self,), lambda grad: (np.broadcast_to(grad, shape),))

	def mean(self):
		count = max(self.size, 1)
		return self.sum() * (1.0 / count)

	def reshape(self, *shape):
		original = self.shape
		return Tensor.from_op(
			self.data.reshape(*shape), (self,), lambda grad: (grad.reshape(original),),
		)


class Parameter(Tensor):
	def __init__(self, data, name='', frozen=False):
		super().__init__(data, requires_grad=True)
		self.name = name
		self.frozen = frozen

	def __repr__(self):
		return 'Parameter({!r}, shape={}, frozen={})'.format(self.name, self.shape, self.frozen)


def as_tensor(value):
	if isinstance(value, Tensor):
		return value
	return Tensor(value)


def _topological_order(root):
	order = []
	visited = set()
	stack = [(root, False)]
	while stack:
		node, expanded = stack.pop()
		if expanded:
			order.append(node)
			continue
		if id(node) in visited:
			continue
		visited.add(id(node))
		stack.append((node, True))
		for parent in node._parents:
			if id(parent) not in visited:
				stack.append((parent, False))
	return order


def backward(loss):
	"""
	Populates `.grad` on every requires_grad tensor reachable from `loss`.

	Gradients accumulate across calls; callers zero them between steps.
	"""
	if loss.size != 1:
		raise ShapeError(op='backward', message='loss must be scalar, got shape {}'.format(loss.shape))
	if not loss.requires_grad:
		logger.debug('backward called on a tensor that does not require grad')
		return

	pending = {id(loss): np.ones_like(loss.data)}
	for node in reversed(_topological_order(loss)):
		grad = pending.pop(id(node), None)
		if grad is None:
			continue
		node._accumulate(grad)
		if node._backward is None:
			continue
		for parent, parent_grad in zip(node._parents, node._backward(grad)):
			if parent_grad is None or not parent.requires_grad:
				continue
			key = id(parent)
			if key in pending:
				pending[key] = pending[key] + parent_grad
			else:
				pending[key] = parent_grad


def zero_grad(params):
	for param in params:
		param.zero_grad()
