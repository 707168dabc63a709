"""
Pin-access direction heuristic.

Each net is connected by a rectilinear minimum spanning tree over its pin
centers; a pin's preferred access direction points along its routing axis
toward the tree neighbor closest to the pin it is being compared with.
"""
from collections import defaultdict

VERTICAL = 'V'
HORIZONTAL = 'H'


def routing_direction(layer):
	"""Odd layers route vertically, even layers horizontally."""
	return VERTICAL if layer % 2 == 1 else HORIZONTAL


def routing_axis(layer):
	return 1 if routing_direction(layer) == VERTICAL else 0


def rectilinear_distance(a, b):
	return abs(a[0] - b[0]) + abs(a[1] - b[1])


def minimum_spanning_tree(centers, ids):
	"""
	Prim's algorithm over rectilinear distance.

	Ties are broken by the lower (connected id, new id) pair, so the tree is
	fully determined by the pin indices.
	"""
	if len(ids) < 2:
		return []
	ids = sorted(ids)
	connected = {ids[0]}
	unconnected = set(ids[1:])
	tree = []
	while unconnected:
		best = None
		for i in sorted(connected):
			for j in sorted(unconnected):
				key = (rectilinear_distance(centers[i], centers[j]), i, j)
				if best is None or key < best:
					best = key
		_, i, j = best
		tree.append((i, j))
		connected.add(j)
		unconnected.remove(j)
	return tree


class NetTopology:
	def __init__(self, pins):
		self.centers = [pin.center for pin in pins]
		self.layers = [pin.layer for pin in pins]
		by_net = defaultdict(list)
		for index, pin in enumerate(pins):
			by_net[pin.net_id].append(index)

		self._neighbors = defaultdict(list)
		for net_pins in by_net.values():
			for i, j in minimum_spanning_tree(self.centers, net_pins):
				self._neighbors[i].append(j)
				self._neighbors[j].append(i)

	def neighbors(self, index):
		return sorted(self._neighbors.get(index, ()))


def direction_flag(i, j, topology):
	"""
	1 when pin i's access edge points toward increasing routing-axis
	coordinate and pin j lies on that side of i, else 0. Pins whose net has a
	single pin always get 0.
	"""
	neighbors = topology.neighbors(i)
	if not neighbors:
		return 0
	centers = topology.centers
	target_point = centers[j]

	def closeness(n):
		dx = centers[n][0] - target_point[0]
		dy = centers[n][1] - target_point[1]
		return dx * dx + dy * dy, n

	toward = min(neighbors, key=closeness)
	axis = routing_axis(topology.layers[i])
	access = centers[toward][axis] - centers[i][axis]
	offset = target_point[axis] - centers[i][axis]
	return 1 if access > 0 and offset > 0 else 0
