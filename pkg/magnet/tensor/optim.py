import logging

import numpy as np

logger = logging.getLogger(__name__)


class Adam:
	"""
	Adam over a fixed parameter list.

	Frozen parameters and parameters without a gradient are skipped entirely:
	neither their values nor their moment estimates change.
	"""

	def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
		self.params = list(params)
		self.lr = lr
		self.betas = betas
		self.eps = eps
		self._moments = {}
		self._steps = {}

	def zero_grad(self):
		for param in self.params:
			param.zero_grad()

	def step(self):
		beta1, beta2 = self.betas
		for param in self.params:
			if param.frozen or param.grad is None:
				continue
			key = id(param)
			m, v = self._moments.get(key, (np.zeros_like(param.data), np.zeros_like(param.data)))
			t = self._steps.get(key, 0) + 1

			m = beta1 * m + (1.0 - beta1) * param.grad
			v = beta2 * v + (1.0 - beta2) * param.grad ** 2
			m_hat = m / (1.0 - beta1 ** t)
			v_hat = v / (1.0 - beta2 ** t)
			param.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

			self._moments[key] = (m, v)
			self._steps[key] = t

	def set_lr(self, lr):
		if lr != self.lr:
			logger.info('Learning rate %g -> %g', self.lr, lr)
			self.lr = lr
