from marshmallow import RAISE, Schema, ValidationError, fields, validate, validates, validates_schema

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def _positive(value):
	return value > 0


class RunConfigSchema(Schema):
	class Meta:
		unknown = RAISE

	seed = fields.Integer(required=True, validate=validate.Range(min=0))
	log_level = fields.String(required=True, validate=validate.OneOf(LOG_LEVELS))
	threads = fields.Integer(required=True, validate=validate.Range(min=1))

	tiles = fields.Integer(required=True, validate=validate.Range(min=1))
	tile_size = fields.Integer(required=True, validate=validate.Range(min=16))
	n_layers = fields.Integer(required=True, validate=validate.Range(min=1))
	pin_rate = fields.Float(required=True, validate=validate.Range(min=0))
	obstacle_rate = fields.Float(required=True, validate=validate.Range(min=0))
	macro_rate = fields.Float(required=True, validate=validate.Range(min=0))
	val_fraction = fields.Float(required=True, validate=validate.Range(min=0, max=1))
	test_fraction = fields.Float(required=True, validate=validate.Range(min=0, max=1))

	edge_thresh_px = fields.Float(required=True, validate=_positive)

	base_filters = fields.Integer(required=True, validate=validate.Range(min=1))
	reduction = fields.Integer(required=True, validate=validate.Range(min=1))
	spatial_kernel = fields.Integer(required=True, validate=validate.Range(min=1))
	use_mscm = fields.Boolean(required=True)
	use_dam = fields.Boolean(required=True)

	epoch_divisor = fields.Integer(required=True, validate=validate.Range(min=1))
	stage1_epochs = fields.List(fields.Integer(validate=validate.Range(min=0)), allow_none=True, validate=validate.Length(equal=3))
	stage2_epochs = fields.List(fields.Integer(validate=validate.Range(min=0)), required=True, validate=validate.Length(equal=2))
	lr_preset = fields.String(required=True, validate=validate.OneOf(('desk', 'full')))
	stage1_lrs = fields.List(fields.Float(validate=_positive), allow_none=True, validate=validate.Length(equal=3))
	stage2_lrs = fields.List(fields.Float(validate=_positive), allow_none=True, validate=validate.Length(equal=2))
	amplification = fields.Float(required=True, validate=_positive)
	batch_size = fields.Integer(required=True, validate=validate.Range(min=1))
	loss = fields.String(required=True, validate=validate.OneOf(('mse', 'mse+bce')))
	bce_weight = fields.Float(required=True, validate=validate.Range(min=0))

	threshold = fields.Float(required=True, validate=validate.Range(min=0, max=1))
	gradcheck_seeds = fields.Integer(required=True, validate=validate.Range(min=1))

	@validates('tile_size')
	def validate_tile_size(self, value, **kwargs):
		if value % 16:
			raise ValidationError('Must be divisible by 16.')

	@validates('spatial_kernel')
	def validate_spatial_kernel(self, value, **kwargs):
		if value % 2 == 0:
			raise ValidationError('Must be odd.')

	@validates_schema
	def validate_splits(self, data, **kwargs):
		if data.get('val_fraction', 0) + data.get('test_fraction', 0) >= 1:
			raise ValidationError('Validation and test fractions leave no training tiles.', 'test_fraction')
