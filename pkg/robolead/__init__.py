"""
    robolead
    ~~~~~~~~~~~~~~

    robolead - closed-loop lab for a socially competent robot leader.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""


__version__ = '1.1.0'
