"""
    robolead.errors
    ~~~~~~~~~~~~~~

    Exceptions raised by the simulation lab.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""


class RoboleadError(Exception):
    """Base class, messages take the form '<strerror>: <detail>'"""
    strerror = 'robolead error'

    def __init__(self, detail=None):
        self.detail = detail
        message = self.strerror if detail is None else '{:s}: {}'.format(self.strerror, detail)
        super(RoboleadError, self).__init__(message)

class InvalidParameterError(RoboleadError, ValueError):
    strerror = 'invalid parameter'

class InvalidInputError(RoboleadError, ValueError):
    strerror = 'invalid input'

class DegenerateGeometryError(RoboleadError):
    strerror = 'degenerate geometry'

class TrialEndError(RoboleadError):
    strerror = 'end of recorded trajectory'

class UnknownExperimentError(RoboleadError):
    strerror = 'unknown experiment id'

class RecordParseError(RoboleadError):
    strerror = 'malformed record'

    def __init__(self, path, lineno, reason):
        self.path = path
        self.lineno = lineno
        super(RecordParseError, self).__init__('{}:{:d}: {} (last good line {:d})'
                                               .format(path, lineno, reason, max(lineno - 1, 0)))

class BridgeError(RoboleadError):
    strerror = 'bridge error'

class BridgeTimeoutError(BridgeError):
    strerror = 'bridge reply timed out'

class BridgeConnectionError(BridgeError):
    strerror = 'bridge connection lost'
