#!/usr/bin/env python

"""Setup for rdest."""

import ast
import os

import setuptools


def version(filename):
    """Return version string."""
    with open(filename) as input_file:
        for line in input_file:
            if line.startswith('__version__'):
                return ast.literal_eval(line.split('=', 1)[1].strip())


with open('README.rst') as readme:
    setuptools.setup(
        name='rdest',
        version=version(os.path.join('rdest', '__init__.py')),
        description='Estimate rate and distortion of intra-coded frames '
                    'with convolutional networks.',
        long_description=readme.read(),
        license='Apache license',
        classifiers=[
            'Environment :: Console',
            'Intended Audience :: Science/Research',
            'Operating System :: OS Independent',
            'Programming Language :: Python',
            'Programming Language :: Python :: 3',
            'Topic :: Multimedia :: Video',
            'Topic :: Scientific/Engineering :: Image Processing',
        ],
        packages=['rdest'],
        install_requires=['numpy>=1.17', 'scipy', 'Pillow'],
        python_requires='>=3.7',
        entry_points={'console_scripts': ['rdest = rdest.cli:main_exit']})
