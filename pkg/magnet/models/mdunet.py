import logging
from dataclasses import asdict, dataclass

import numpy as np

from magnet.errors import ConfigError, ShapeError
from magnet.models.attention import DEFAULT_REDUCTION, SPATIAL_KERNEL, DynamicAttention
from magnet.models.base import Conv, Module, UpConv
from magnet.tensor import ops
from magnet.tensor.core import Parameter, as_tensor

logger = logging.getLogger(__name__)

LEVELS = 4
BRANCH_KERNELS = (3, 5, 7)


@dataclass
class UNetConfig:
	tile_size: int = 64
	in_channels: int = 9
	base_filters: int = 16
	reduction: int = DEFAULT_REDUCTION
	spatial_kernel: int = SPATIAL_KERNEL
	use_mscm: bool = True
	use_dam: bool = True
	seed: int = 0

	@property
	def channel_ladder(self):
		return [self.base_filters * 2 ** level for level in range(LEVELS)]

	@property
	def bottleneck_size(self):
		return self.tile_size // 2 ** LEVELS

	@property
	def bottleneck_channels(self):
		return self.channel_ladder[-1]

	def validate(self):
		if self.tile_size <= 0 or self.tile_size % 2 ** LEVELS:
			raise ConfigError(field='tile_size', message='must be a positive multiple of {}, got {}'.format(2 ** LEVELS, self.tile_size))
		if self.in_channels <= 0:
			raise ConfigError(field='in_channels', message='must be positive')
		if self.base_filters <= 0:
			raise ConfigError(field='base_filters', message='must be positive')
		if self.spatial_kernel <= 0 or self.spatial_kernel % 2 == 0:
			raise ConfigError(field='spatial_kernel', message='must be a positive odd size')
		return self

	def to_dict(self):
		return asdict(self)


class MSCMBlock(Module):
	"""
	Multi-scale conv: three bias-free branches (3x3, 5x5, 7x7) over the same
	input, summed with learnable scalar weights.
	"""

	def __init__(self, rng, c_in, c_out, kernel_sizes=BRANCH_KERNELS):
		self.branches = [Conv(rng, k, c_in, c_out, bias=False) for k in kernel_sizes]
		self.mix = Parameter(np.full(len(kernel_sizes), 1.0 / len(kernel_sizes)))

	@property
	def channels(self):
		return self.branches[0].channels

	def __call__(self, f):
		return mscm_forward(self, f)


def mscm_forward(block, f):
	c_in, _ = block.channels
	if f.ndim != 3 or f.shape[2] != c_in:
		raise ShapeError(op='mscm', message='input {} does not have {} channels'.format(f.shape, c_in))
	out = None
	for index, branch in enumerate(block.branches):
		term = block.mix[index] * branch(f)
		out = term if out is None else out + term
	return out


class PlainConvBlock(Module):
	"""Single 3x3 conv standing in for MSCM in the ablation."""

	def __init__(self, rng, c_in, c_out):
		self.conv = Conv(rng, 3, c_in, c_out)

	@property
	def channels(self):
		return self.conv.channels

	def __call__(self, f):
		return self.conv(f)


class DecoderStage(Module):
	def __init__(self, rng, c_in, c_out, block):
		self.up = UpConv(rng, c_in, c_out)
		self.block = block(rng, 2 * c_out, c_out)

	def __call__(self, x, skip):
		return ops.relu(self.block(ops.concat_channels(self.up(x), skip)))


class MDUnet(Module):
	"""
	Encoder of four (block, relu, 2x2 max pool) levels, dynamic attention at
	the bottleneck, four upsampling decoder stages fed by the matching skips
	and one refinement stage producing a single-channel probability map.
	"""

	def __init__(self, config):
		self.config = config.validate()
		rng = np.random.default_rng(config.seed)
		block = MSCMBlock if config.use_mscm else PlainConvBlock
		ladder = config.channel_ladder

		self.encoders = []
		c_in = config.in_channels
		for channels in ladder:
			self.encoders.append(block(rng, c_in, channels))
			c_in = channels

		self.dam = DynamicAttention(rng, c_in, config.reduction, config.spatial_kernel) if config.use_dam else None

		self.decoders = []
		for channels in reversed(ladder):
			self.decoders.append(DecoderStage(rng, c_in, channels, block))
			c_in = channels

		self.refine = Conv(rng, 3, c_in, c_in)
		self.head = Conv(rng, 1, c_in, 1)
		self.bind_names()

	def __call__(self, features, bottleneck_attention=None, trace=None):
		return mdunet_forward(self, features, bottleneck_attention, trace)


def mdunet_forward(model, features, bottleneck_attention=None, trace=None):
	"""
	`bottleneck_attention` replaces the built-in attention at the deepest map
	(joint mode passes the guided variant). `trace`, when a dict, receives the
	skips, the bottleneck before and after attention, and the gates.
	"""
	config = model.config
	x = as_tensor(features)
	expected = (config.tile_size, config.tile_size, config.in_channels)
	if x.shape != expected:
		raise ShapeError(op='mdunet', message='input {} != expected {}'.format(x.shape, expected))

	skips = []
	for encoder in model.encoders:
		x = ops.relu(encoder(x))
		skips.append(x)
		x = ops.max_pool2(x)

	if trace is not None:
		trace['skips'] = [skip.shape for skip in skips]
		trace['bottleneck'] = x
	attend = bottleneck_attention or model.dam
	if attend is not None:
		x = attend(x, trace=trace)
	if trace is not None:
		trace['attended'] = x

	for stage, skip in zip(model.decoders, reversed(skips)):
		x = stage(x, skip)

	x = ops.relu(model.refine(x))
	return ops.sigmoid(model.head(x))
