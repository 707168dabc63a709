"""
NPY v1.0 reader and writer for feature, label and prediction maps.

Only little-endian float32/float64 C-order arrays are accepted; everything
else is rejected with the offending header echoed back.
"""
import ast
import logging
import struct

import numpy as np
from numpy.lib import format as npy_format

from magnet.errors import FormatError, MissingDataError
from magnet.tensor.core import Tensor

logger = logging.getLogger(__name__)

MAGIC = b'\x93NUMPY'
SUPPORTED_DTYPES = {'<f4': np.dtype('<f4'), '<f8': np.dtype('<f8')}


def _parse_header(raw, path):
	try:
		header = ast.literal_eval(raw.decode('latin1'))
	except (ValueError, SyntaxError, UnicodeDecodeError):
		raise FormatError(path=path, message='header is not a Python literal', header=raw)
	if not isinstance(header, dict) or set(header) != {'descr', 'fortran_order', 'shape'}:
		raise FormatError(path=path, message='header must hold exactly descr/fortran_order/shape', header=raw)
	if header['fortran_order']:
		raise FormatError(path=path, message='fortran_order arrays are not supported', header=raw)
	if header['descr'] not in SUPPORTED_DTYPES:
		raise FormatError(path=path, message='unsupported dtype {!r}'.format(header['descr']), header=raw)
	shape = header['shape']
	if not isinstance(shape, tuple) or not all(isinstance(dim, int) and dim >= 0 for dim in shape):
		raise FormatError(path=path, message='invalid shape {!r}'.format(shape), header=raw)
	return SUPPORTED_DTYPES[header['descr']], shape


def read_npy_bytes(buffer, path='<bytes>'):
	if len(buffer) < 10:
		raise FormatError(path=path, message='truncated preamble', header=bytes(buffer[:10]))
	if buffer[:6] != MAGIC:
		raise FormatError(path=path, message='bad magic', header=bytes(buffer[:10]))
	major, minor = buffer[6], buffer[7]
	if (major, minor) != (1, 0):
		raise FormatError(path=path, message='unsupported version {}.{}'.format(major, minor), header=bytes(buffer[:10]))
	header_len, = struct.unpack('<H', buffer[8:10])
	if len(buffer) < 10 + header_len:
		raise FormatError(path=path, message='truncated header', header=bytes(buffer[10:]))
	raw = bytes(buffer[10:10 + header_len])
	dtype, shape = _parse_header(raw, path)

	count = int(np.prod(shape, dtype=np.int64))
	payload = buffer[10 + header_len:]
	if len(payload) != count * dtype.itemsize:
		raise FormatError(
			path=path, message='payload has {} bytes, expected {}'.format(len(payload), count * dtype.itemsize), header=raw,
		)
	return np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64).reshape(shape)


def load_npy(path):
	"""Returns a float64 ndarray; callers that need autodiff wrap it in Tensor themselves."""
	try:
		with open(path, 'rb') as file:
			buffer = file.read()
	except FileNotFoundError:
		raise MissingDataError(object='NPY file', path=str(path))
	return read_npy_bytes(buffer, str(path))


def save_npy(array, path):
	if isinstance(array, Tensor):
		array = array.data
	array = np.ascontiguousarray(array, dtype='<f8')
	with open(path, 'wb') as file:
		npy_format.write_array(file, array, version=(1, 0), allow_pickle=False)
	logger.debug('Saved %s array to %s', array.shape, path)
