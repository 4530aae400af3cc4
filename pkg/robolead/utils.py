"""
    robolead.utils
    ~~~~~~~~~~~~~~

    Helper functions: parameter and population files, overrides, hashing, setup and run
    statistics.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import json
import shutil
import hashlib
import logging
import psutil
from .errors import InvalidParameterError


DIRNAME = os.path.dirname(os.path.abspath(__file__))
CONFIG_DIR = os.path.join(DIRNAME, 'config')
CONFIG_FILES = ('params.json', 'population.json')

OUT_ENV = 'ROBOLEAD_OUT'


class STATS:
    data = {}

    @classmethod
    def add(cls, name, value=1):
        if name in cls.data:
            cls.data[name] += value
        else:
            cls.data[name] = value

    @classmethod
    def merge(cls, other):
        for name, value in other.items():
            cls.add(name, value)

    @classmethod
    def reset(cls):
        cls.data = {}

    @classmethod
    def log(cls):
        logger = logging.getLogger(__name__)
        logger.info('STATS: ' + str(dict(sorted(cls.data.items()))))


def _load_json(path, what):
    logger = logging.getLogger(__name__)

    if not os.path.isfile(path):
        logger.error('Error while loading {:s}: File {:s} does not exist.'.format(what, path))
        return None
    try:
        with open(path) as file:
            data = json.load(file)
    except (ValueError, OSError) as e:
        logger.error('Error while loading {:s}: {}'.format(what, e))
        return None
    if not isinstance(data, dict):
        logger.error('Error while loading {:s}: {:s} does not hold an object'.format(what, path))
        return None
    return data


def read_params(path=None):
    """Reads a parameter file. Missing keys take their defaults.

    Parameters:
    ----------
    path : {str}, optional
        Path to the parameter file (the default is None, the shipped config/params.json)

    Returns
    -------
    Params
        Validated parameter set, None if the file is missing or invalid
    """

    from .params import Params
    logger = logging.getLogger(__name__)

    data = _load_json(path or os.path.join(CONFIG_DIR, 'params.json'), 'params')
    if data is None:
        return None
    try:
        return Params.from_dict(data)
    except (InvalidParameterError, TypeError) as e:
        logger.error('Error while loading params: {}'.format(e))
        return None


def read_population(path=None):
    """Reads a fish population file, returns None if the file is missing or invalid"""
    from .fish import Population
    logger = logging.getLogger(__name__)

    data = _load_json(path or os.path.join(CONFIG_DIR, 'population.json'), 'population')
    if data is None:
        return None
    try:
        return Population.from_dict(data)
    except (InvalidParameterError, TypeError, ValueError) as e:
        logger.error('Error while loading population: {}'.format(e))
        return None


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(params, overrides):
    """Applies 'section.field=value' overrides to a parameter set.

    Parameters:
    ----------
    params : {Params}
        Parameter set to start from
    overrides : {list of str}
        Overrides, values are parsed as JSON where possible ('reference' takes a JSON list)

    Raises
    ------
    InvalidParameterError
        If an override is malformed, names an unknown field or yields invalid parameters

    Returns
    -------
    Params
        New parameter set
    """

    from .params import Params

    if not overrides:
        return params
    data = params.to_dict()
    for item in overrides:
        key, sep, text = item.partition('=')
        if not sep:
            raise InvalidParameterError('override {!r} is not of the form section.field=value'.format(item))
        if key == 'reference':
            data['reference'] = _parse_value(text)
            continue
        section, dot, name = key.partition('.')
        if not dot or section not in Params.SECTIONS:
            raise InvalidParameterError('override {!r} names no parameter section'.format(item))
        if name not in data[section]:
            raise InvalidParameterError('unknown parameter {:s}'.format(key))
        data[section][name] = _parse_value(text)
    return Params.from_dict(data)


def params_hash(params):
    """SHA-256 of the canonical JSON form of a parameter set"""
    text = json.dumps(params.to_dict(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def create_config(path):
    """Initial configuration: Creates dir 'path' and puts the default parameter files there

    Parameters
    ----------
    path : str
        Path to dir where to store the files

    """

    logger = logging.getLogger(__name__)

    logger.info('Initial setup...')

    if not os.path.isdir(path):
        logger.info('Creating directory {:s}...'.format(path))
        try:
            os.makedirs(path, mode=int('755', base=8))
        except OSError as e:
            logger.error('Could not create {:s}: {}'.format(path, e))
            logger.error('Aborting setup...')
            return 1
    else:
        logger.info('Directory {:s} does already exist...'.format(path))

    for name in CONFIG_FILES:
        target = os.path.join(path, name)
        if os.path.isfile(target):
            logger.info('File {:s} does already exist...'.format(target))
            continue
        logger.info('Creating default config {:s}...'.format(target))
        try:
            shutil.copyfile(os.path.join(CONFIG_DIR, name), target)
        except OSError as e:
            logger.error('Could not write to file {:s}: {}'.format(target, e))

    return 0


def check_pid(pidfile_path):
    """True if no live process holds the pid file, stale files are removed"""
    if os.path.exists(pidfile_path):
        try:
            with open(pidfile_path) as file:
                pidno = int(file.read().strip())
            try:
                psutil.Process(pidno)
                return False
            except psutil.NoSuchProcess:
                os.unlink(pidfile_path)
        except ValueError:
            os.unlink(pidfile_path)
    return True


def output_root(out=None):
    """Output directory from the argument, else $ROBOLEAD_OUT, else the working directory"""
    return out or os.environ.get(OUT_ENV) or os.getcwd()
