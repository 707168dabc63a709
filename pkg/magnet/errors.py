class MagnetError(Exception):
	EXIT_CODE = 1
	TITLE = 'Unknown error'
	DETAIL = 'Unknown error'

	def __init__(self, source=None, **kwargs):
		super().__init__()
		self.source = source
		self.kwargs = kwargs

	@property
	def detail(self):
		try:
			return self.DETAIL.format(**self.kwargs)
		except (KeyError, IndexError):
			return self.DETAIL

	def to_dict(self):
		result = {
			'exit_code': self.EXIT_CODE,
			'title': self.TITLE,
			'detail': self.detail,
		}
		if self.source is not None:
			result['source'] = self.source
		return result

	def __str__(self):
		return '{}: {}'.format(self.TITLE, self.detail)


class InternalError(MagnetError):
	EXIT_CODE = 1
	TITLE = 'Internal error'


class UsageError(MagnetError):
	EXIT_CODE = 2
	TITLE = 'Usage error'
	DETAIL = '{message}'


class ConfigError(UsageError):
	TITLE = 'Configuration error'
	DETAIL = 'Invalid value for {field}: {message}'


class ShapeError(UsageError):
	TITLE = 'Shape error'
	DETAIL = '{op}: {message}'


class CheckpointMismatchError(ConfigError):
	TITLE = 'Checkpoint mismatch'
	DETAIL = 'Checkpoint field {field} is {found}, expected {expected}'


class LockedError(UsageError):
	TITLE = 'Directory locked'
	DETAIL = 'Output directory {path} is in use by another process'


class DataError(MagnetError):
	EXIT_CODE = 3
	TITLE = 'Data error'
	DETAIL = '{message}'


class FormatError(DataError):
	TITLE = 'Format error'
	DETAIL = '{path}: {message} (header: {header!r})'


class CheckpointCorruptError(DataError):
	TITLE = 'Corrupt checkpoint'
	DETAIL = '{path}: {message}'


class MissingDataError(DataError):
	TITLE = 'Missing data'
	DETAIL = '{object} not found: {path}'


class GeometryError(DataError):
	TITLE = 'Geometry error'


class NumericalError(MagnetError):
	EXIT_CODE = 4
	TITLE = 'Numerical error'
	DETAIL = '{message}'


class DivergenceError(NumericalError):
	TITLE = 'Training diverged'
	DETAIL = 'Non-finite loss {loss} at epoch {epoch} ({phase})'


class GradcheckFailedError(NumericalError):
	TITLE = 'Gradient check failed'
	DETAIL = '{failed} of {total} checks exceeded tolerance'


class UndefinedRangeError(NumericalError):
	TITLE = 'Undefined range'
	DETAIL = 'Truth map is constant ({value}); NRMSE range is zero'
