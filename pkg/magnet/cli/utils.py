import functools
import json
import logging
import os
import sys
from contextlib import contextmanager
from multiprocessing.dummy import Pool as ThreadPool

import click

from magnet.errors import InternalError, LockedError, MagnetError, UsageError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(threadName)-12.12s] [%(levelname)-5.5s]  %(message)s"
LOCK_NAME = '.magnet.lock'


def setup_logging(level='INFO'):
	logging.basicConfig(level=level, format=LOG_FORMAT, handlers=[logging.StreamHandler(sys.stdout)], force=True)


def safe_command(func):
	"""
	Converts every failure into the error's exit code, with its JSON body on
	stderr. Anything that is not a MagnetError becomes an internal error.
	"""
	@functools.wraps(func)
	def f(*args, **kwargs):
		try:
			return func(*args, **kwargs)
		except (click.exceptions.Exit, click.ClickException):
			raise
		except Exception as e:
			logger.exception(str(e))

			if not isinstance(e, MagnetError):
				e = InternalError()

			result = e.to_dict()
			click.echo(json.dumps(result, default=str), err=True)
			sys.exit(result['exit_code'])

	return f


@contextmanager
def output_lock(out_dir):
	"""Creates `out_dir` and holds an exclusive lockfile in it for the duration of the block."""
	try:
		os.makedirs(out_dir, exist_ok=True)
	except OSError as error:
		raise UsageError(message='cannot create output directory {}: {}'.format(out_dir, error.strerror))
	path = os.path.join(out_dir, LOCK_NAME)
	try:
		fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
	except FileExistsError:
		raise LockedError(path=out_dir)
	except OSError as error:
		raise UsageError(message='cannot write to {}: {}'.format(out_dir, error.strerror))
	try:
		os.write(fd, str(os.getpid()).encode('ascii'))
		os.close(fd)
		yield out_dir
	finally:
		os.remove(path)


def parallel_map(func, items, threads):
	"""Ordered map over a thread pool; one thread runs inline."""
	items = list(items)
	if threads <= 1 or len(items) <= 1:
		return [func(item) for item in items]
	pool = ThreadPool(threads)
	try:
		return pool.map(func, items)
	finally:
		pool.close()
		pool.join()
