"""
Channel and spatial attention for the bottleneck feature map, plus the
guidance-map variants used in joint mode.
"""
from magnet.errors import ShapeError
from magnet.models.base import Module
from magnet.tensor import ops
from magnet.tensor.init import conv_kernel, linear_weight, zeros

DEFAULT_REDUCTION = 16
SPATIAL_KERNEL = 7


def effective_reduction(channels, reduction=DEFAULT_REDUCTION):
	return reduction if channels >= reduction else channels


class ChannelAttention(Module):
	def __init__(self, rng, channels, reduction=DEFAULT_REDUCTION):
		r = effective_reduction(channels, reduction)
		if channels % r:
			raise ShapeError(op='channel_attention', message='{} channels not divisible by reduction {}'.format(channels, r))
		hidden = channels // r
		self.channels = channels
		self.reduction = r
		self.w1 = linear_weight(rng, hidden, channels)
		self.b1 = zeros((hidden,))
		self.w2 = linear_weight(rng, channels, hidden)
		self.b2 = zeros((channels,))

	def logits(self, z):
		return ops.linear(ops.linear(z, self.w1, self.b1), self.w2, self.b2)

	def __call__(self, f):
		return channel_attention_forward(self, f)


def _check_channels(att, f, op):
	if f.ndim != 3 or f.shape[2] != att.channels:
		raise ShapeError(op=op, message='map {} does not have {} channels'.format(f.shape, att.channels))


def channel_attention_forward(att, f):
	"""Returns the rescaled map and the per-channel gate a_c (1 x 1 x C)."""
	_check_channels(att, f, 'channel_attention')
	z = ops.global_avg_pool(f).reshape(att.channels)
	a_c = ops.sigmoid(att.logits(z)).reshape(1, 1, att.channels)
	return ops.scale_channels(f, a_c), a_c


class SpatialAttention(Module):
	def __init__(self, rng, kernel_size=SPATIAL_KERNEL):
		self.kernel = conv_kernel(rng, kernel_size, 2, 1)

	def __call__(self, f):
		return spatial_attention_forward(self, f)


def spatial_attention_forward(att, f):
	"""Returns the rescaled map and the H x W x 1 mask."""
	mask = ops.sigmoid(ops.conv2d(ops.channel_stat_maps(f), att.kernel))
	return ops.scale_spatial(f, mask), mask


class DynamicAttention(Module):
	"""Channel attention followed by spatial attention."""

	def __init__(self, rng, channels, reduction=DEFAULT_REDUCTION, kernel_size=SPATIAL_KERNEL):
		self.channel = ChannelAttention(rng, channels, reduction)
		self.spatial = SpatialAttention(rng, kernel_size)

	def __call__(self, f, trace=None):
		f, a_c = self.channel(f)
		f, mask = self.spatial(f)
		if trace is not None:
			trace['channel_gate'] = a_c
			trace['spatial_mask'] = mask
		return f


class GuidedChannelAttention(Module):
	"""
	Channel attention whose MLP input is the pooled feature vector plus a
	learned projection W_s of the pooled guidance map.

	The MLP is borrowed from an existing ChannelAttention; only W_s is owned
	here, so with an all-zero guidance map the gate equals the unguided one.
	"""

	def __init__(self, rng, channel_attention):
		self._shared = channel_attention
		self.w_s = linear_weight(rng, channel_attention.channels, 1)

	@property
	def channels(self):
		return self._shared.channels

	def __call__(self, f, s):
		return guided_channel_attention(self, f, s)


def guided_channel_attention(params, f, s):
	_check_channels(params, f, 'guided_channel_attention')
	if s.ndim != 3 or s.shape != f.shape[:2] + (1,):
		raise ShapeError(op='guided_channel_attention', message='guidance {} does not match map {}'.format(s.shape, f.shape))
	z = ops.global_avg_pool(f).reshape(params.channels)
	pooled_s = ops.global_avg_pool(s).reshape(1)
	a_c = ops.sigmoid(params._shared.logits(z + ops.linear(pooled_s, params.w_s))).reshape(1, 1, params.channels)
	return ops.scale_channels(f, a_c), a_c


class GuidedSpatialAttention(Module):
	def __init__(self, rng, kernel_size=SPATIAL_KERNEL):
		self.kernel = conv_kernel(rng, kernel_size, 2, 1)

	def __call__(self, f, s):
		return guided_spatial_attention(self, f, s)


def guided_spatial_attention(params, f, s):
	"""Mask from a conv over the stacked channel-mean of F and the guidance map."""
	stacked = ops.concat_channels(ops.channel_mean_map(f), s)
	mask = ops.sigmoid(ops.conv2d(stacked, params.kernel))
	return ops.scale_spatial(f, mask), mask


class GuidedAttention(Module):
	def __init__(self, rng, channel_attention, kernel_size=SPATIAL_KERNEL):
		self.channel = GuidedChannelAttention(rng, channel_attention)
		self.spatial = GuidedSpatialAttention(rng, kernel_size)

	def bind(self, s):
		"""Bottleneck hook closing over a guidance map already pooled to bottleneck resolution."""
		def attend(f, trace=None):
			f, a_c = self.channel(f, s)
			f, mask = self.spatial(f, s)
			if trace is not None:
				trace['channel_gate'] = a_c
				trace['spatial_mask'] = mask
			return f
		return attend
