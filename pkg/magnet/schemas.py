from marshmallow import Schema, fields, post_load

from magnet.data.layout import DatasetMeta, Obstacle, Pin

MANIFEST_VERSION = 1
GRAPH_VERSION = 1


class RectSchema(Schema):
	x0 = fields.Float(required=True)
	y0 = fields.Float(required=True)
	x1 = fields.Float(required=True)
	y1 = fields.Float(required=True)
	layer = fields.Integer(required=True)


class PinSchema(RectSchema):
	net_id = fields.Integer(required=True)

	@post_load
	def make_pin(self, data, **kwargs):
		return Pin(**data)


class ObstacleSchema(RectSchema):
	@post_load
	def make_obstacle(self, data, **kwargs):
		return Obstacle(**data)


class DatasetMetaSchema(Schema):
	tile_size = fields.Integer(required=True)
	n_layers = fields.Integer(required=True)
	seed = fields.Integer(required=True)

	@post_load
	def make_meta(self, data, **kwargs):
		return DatasetMeta(**data)


class TileEntrySchema(Schema):
	index = fields.Integer(required=True)
	grid_x = fields.Integer(required=True)
	grid_y = fields.Integer(required=True)
	split = fields.String(required=True)
	features = fields.String(required=True)
	label = fields.String(required=True)
	n_layers = fields.Integer(required=True)
	pins = fields.Nested(PinSchema, many=True, required=True)
	obstacles = fields.Nested(ObstacleSchema, many=True, required=True)


class ManifestSchema(Schema):
	version = fields.Integer(required=True)
	meta = fields.Nested(DatasetMetaSchema, required=True)
	tiles = fields.Nested(TileEntrySchema, many=True, required=True)


class GraphNodeSchema(Schema):
	pin_ref = fields.Integer(required=True)
	pixel = fields.List(fields.Integer(), required=True)
	feat = fields.List(fields.Float(), required=True)


class GraphEdgeSchema(Schema):
	src = fields.Integer(required=True)
	dst = fields.Integer(required=True)
	feat = fields.List(fields.Float(), required=True)


class TileGraphSchema(Schema):
	version = fields.Integer(required=True)
	grid_x = fields.Integer(required=True)
	grid_y = fields.Integer(required=True)
	tile_size = fields.Integer(required=True)
	is_empty = fields.Boolean(required=True)
	nodes = fields.Nested(GraphNodeSchema, many=True, required=True)
	edges = fields.Nested(GraphEdgeSchema, many=True, required=True)


class TileScoreSchema(Schema):
	index = fields.Integer()
	nrmse = fields.Float()
	ssim = fields.Float()
	tp = fields.Integer()
	fp = fields.Integer()
	tn = fields.Integer()
	fn = fields.Integer()


class EvalReportSchema(Schema):
	threshold = fields.Float()
	avg_nrmse = fields.Float()
	avg_ssim = fields.Float()
	tpr = fields.Float()
	fpr = fields.Float()
	precision = fields.Float()
	f1 = fields.Float()
	accuracy = fields.Float()
	auc = fields.Float()
	degenerate = fields.List(fields.String())
	per_tile = fields.Nested(TileScoreSchema, many=True)


class ComparisonSchema(Schema):
	unet = fields.Nested(EvalReportSchema)
	magnet = fields.Nested(EvalReportSchema)
	fpr_delta = fields.Float()
	tpr_delta = fields.Float()


class ParamEntrySchema(Schema):
	name = fields.String(required=True)
	shape = fields.List(fields.Integer(), required=True)
	offset = fields.Integer(required=True)
	nbytes = fields.Integer(required=True)


class CheckpointManifestSchema(Schema):
	version = fields.Integer(required=True)
	stage = fields.Integer(required=True)
	epoch = fields.Integer(required=True)
	config_hash = fields.String(required=True)
	model_config = fields.Dict(required=True)
	rng_state = fields.Dict(required=True)
	params = fields.Nested(ParamEntrySchema, many=True, required=True)
	payload_bytes = fields.Integer(required=True)
