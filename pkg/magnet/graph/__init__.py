from magnet.graph.builder import (
	GraphEdge,
	GraphNode,
	TileGraph,
	brute_force_edges,
	build_tile_graph,
	load_graph,
	node_coord_feature,
	obstacle_density,
	save_graph,
)
from magnet.graph.guidance import GuidanceMap, build_guidance_map
from magnet.graph.steiner import direction_flag
