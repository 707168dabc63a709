import numpy as np

from magnet.tensor.core import Parameter, backward
from magnet.tensor.optim import Adam


def test_zero_grads_leave_params():
	p = Parameter(np.array([1.0, -2.0]))
	p.grad = np.zeros(2)
	Adam([p], lr=0.1).step()
	assert p.data.tolist() == [1.0, -2.0]


def test_missing_grad_is_skipped():
	p = Parameter(np.array([0.5]))
	Adam([p], lr=0.1).step()
	assert p.data.tolist() == [0.5]


def test_frozen_param_unchanged():
	p = Parameter(np.array([[0.3, -0.7]]), frozen=True)
	before = p.data.tobytes()
	p.grad = np.array([[5.0, -5.0]])
	optimizer = Adam([p], lr=0.1)
	for _ in range(3):
		optimizer.step()
	assert p.data.tobytes() == before


def test_unfrozen_param_moves_against_gradient():
	p = Parameter(np.array([0.0]))
	p.grad = np.array([1.0])
	Adam([p], lr=0.01).step()
	assert p.data[0] < 0.0


def test_quadratic_converges():
	x = Parameter(np.array([0.0]))
	optimizer = Adam([x], lr=0.01)
	for _ in range(1000):
		optimizer.zero_grad()
		diff = x - 3.0
		backward((diff * diff).sum())
		optimizer.step()
	assert abs(x.data[0] - 3.0) < 0.05


def test_set_lr():
	optimizer = Adam([Parameter(np.zeros(1))], lr=1e-3)
	optimizer.set_lr(1e-4)
	assert optimizer.lr == 1e-4
