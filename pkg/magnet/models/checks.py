"""Gradient checks for the network blocks, registered next to the primitive ones."""

from magnet.graph.builder import GraphEdge, GraphNode, TileGraph
from magnet.models.attention import ChannelAttention, GuidedAttention, SpatialAttention
from magnet.models.fusion import DiscriminatorHead, MagNet
from magnet.models.gnn import GnnLayer, TileGNN, edge_message, gnn_forward, node_update
from magnet.models.mdunet import MDUnet, MSCMBlock, UNetConfig
from magnet.tensor.core import Parameter
from magnet.tensor.gradcheck import NETWORK_TOLERANCE, register

MICRO_TILE = 16


def micro_config(seed=0, tile_size=MICRO_TILE, base_filters=2):
	return UNetConfig(tile_size=tile_size, base_filters=base_filters, seed=seed)


def _input(rng, shape):
	return Parameter(rng.uniform(-1.0, 1.0, size=shape))


def _random_graph(rng, n_nodes, tile_size=MICRO_TILE, p_edge=0.4):
	nodes = [
		GraphNode(i, (int(rng.integers(tile_size)), int(rng.integers(tile_size))), tuple(rng.uniform(size=3)))
		for i in range(n_nodes)
	]
	edges = [
		GraphEdge(src, dst, (float(rng.uniform()), float(rng.integers(2))))
		for dst in range(n_nodes) for src in range(n_nodes)
		if src != dst and rng.uniform() < p_edge
	]
	return TileGraph(0, 0, tile_size, nodes, edges)


@register('mscm')
def _mscm(rng):
	block = MSCMBlock(rng, 2, 3)
	params = [block.branches[0].kernel, block.branches[2].kernel, block.mix]
	return (lambda x, *_: block(x)), [_input(rng, (5, 5, 2))] + params


@register('channel_attention')
def _channel_attention(rng):
	att = ChannelAttention(rng, 4, reduction=2)
	return (lambda f, *_: att(f)[0]), [_input(rng, (3, 3, 4)), att.w1, att.b2]


@register('spatial_attention')
def _spatial_attention(rng):
	att = SpatialAttention(rng, kernel_size=3)
	return (lambda f, *_: att(f)[0]), [_input(rng, (4, 4, 3)), att.kernel]


@register('guided_attention')
def _guided_attention(rng):
	att = GuidedAttention(rng, ChannelAttention(rng, 4, reduction=2), kernel_size=3)
	s = _input(rng, (3, 3, 1))
	return (lambda f, s, *_: att.bind(s)(f)), [_input(rng, (3, 3, 4)), s, att.channel.w_s, att.spatial.kernel]


@register('edge_message')
def _edge_message(rng):
	layer = GnnLayer(rng, 3, 4)
	fn = lambda v_i, v_j, e, *_: edge_message(layer, v_i, v_j, e)
	return fn, [_input(rng, (5, 3)), _input(rng, (5, 3)), _input(rng, (5, 2)), layer.message.layers[0].weight]


@register('node_update')
def _node_update(rng):
	layer = GnnLayer(rng, 3, 4)
	fn = lambda e, v, *_: node_update(layer, e, v)
	return fn, [_input(rng, (4, 16)), _input(rng, (4, 3)), layer.update.layers[1].weight]


@register('gnn')
def _gnn(rng):
	gnn = TileGNN(rng)
	graph = _random_graph(rng, 6)
	params = [gnn.layers[0].message.layers[0].weight, gnn.layers[2].update.layers[1].bias, gnn.readout.weight]
	return (lambda *_: gnn_forward(gnn, graph).scores), params


@register('discriminator')
def _discriminator(rng):
	head = DiscriminatorHead(rng)
	return (lambda x, *_: head(x)), [_input(rng, (8, 8, 2)), head.conv1.kernel, head.conv2.bias]


@register('mdunet_micro', tolerance=NETWORK_TOLERANCE, max_entries=16)
def _mdunet(rng):
	model = MDUnet(micro_config(int(rng.integers(1 << 16))))
	params = [
		model.encoders[0].branches[1].kernel,
		model.encoders[3].mix,
		model.dam.channel.w1,
		model.dam.spatial.kernel,
		model.decoders[0].up.kernel,
		model.head.kernel,
	]
	return (lambda x, *_: model(x)), [_input(rng, (MICRO_TILE, MICRO_TILE, 9))] + params


@register('magnet_micro', tolerance=NETWORK_TOLERANCE, max_entries=16)
def _magnet(rng):
	model = MagNet(micro_config(int(rng.integers(1 << 16))))
	graph = _random_graph(rng, 8)
	params = [
		model.gnn.readout.weight,
		model.guided.channel.w_s,
		model.guided.spatial.kernel,
		model.head.conv1.kernel,
		model.unet.decoders[3].block.mix,
	]
	return (lambda x, *_: model(x, graph)[2]), [_input(rng, (MICRO_TILE, MICRO_TILE, 9))] + params

