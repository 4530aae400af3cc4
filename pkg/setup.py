#!/usr/bin/env python
"""
    setup
    ~~~~~~~~~~~~~~

    robolead installation using setuptools.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import os
import re
from setuptools import setup


DIRNAME = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(DIRNAME, 'README.md'), 'r') as file:
    readme = file.read()

with open(os.path.join(DIRNAME, 'robolead/__init__.py'), 'r') as file:
    version = re.search(r'__version__ = \'(.*?)\'', file.read()).group(1)

setup(
    name='robolead',
    version=version,
    description='Closed-loop simulation lab for a socially competent fish-leading robot',
    long_description=readme,
    long_description_content_type="text/markdown",
    keywords='robot fish leadership simulation closed-loop',
    license='GPLv3',
    packages=['robolead'],
    package_data={'robolead': ['config/*.json']},
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=[
        'errorhandler',
        'psutil',
        'numpy',
        'scipy',
        'pandas',
    ],
    extras_require={
        'dev': [
            'pytest',
            'pytest-dependency',
            'pytest-runner',
        ]
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering',
    ],
    entry_points = {
        'console_scripts': ['robolead=robolead.main:main'],
    },
    zip_safe=False
)
