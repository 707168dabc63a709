import numpy as np

from magnet.tensor.core import Parameter


def he_normal(rng, shape, fan_in, name=''):
	return Parameter(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape), name=name)


def xavier_uniform(rng, shape, fan_in, fan_out, name=''):
	limit = np.sqrt(6.0 / (fan_in + fan_out))
	return Parameter(rng.uniform(-limit, limit, size=shape), name=name)


def conv_kernel(rng, k, c_in, c_out, name=''):
	return he_normal(rng, (k, k, c_in, c_out), fan_in=k * k * c_in, name=name)


def linear_weight(rng, m, n, name=''):
	return xavier_uniform(rng, (m, n), fan_in=n, fan_out=m, name=name)


def zeros(shape, name=''):
	return Parameter(np.zeros(shape), name=name)
