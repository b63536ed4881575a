#!/usr/bin/env python3
"""
Setup script for epbabs.
"""

from setuptools import setup, find_packages
import os

# Read the version from __init__.py
with open(os.path.join('epbabs', '__init__.py'), 'r', encoding='utf-8') as f:
    for line in f:
        if line.startswith('__version__'):
            version = line.split('=')[1].strip().strip("'").strip('"')
            break
    else:
        version = '0.1.0'

# Read the long description from README.md
try:
    with open('README.md', 'r', encoding='utf-8') as f:
        long_description = f.read()
except FileNotFoundError:
    long_description = 'epbabs - rear-wheel ABS simulation for an electric parking brake actuator'

setup(
    name='epbabs',
    version=version,
    description='Rear-wheel anti-lock braking simulation for an integrated electric parking brake',
    long_description=long_description,
    long_description_content_type='text/markdown',
    author='epbabs maintainers',
    license='MIT',
    keywords='ABS electric-parking-brake sliding-mode-control vehicle-dynamics simulation',
    packages=find_packages(exclude=['examples', 'examples.*']),
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering',
    ],
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.6',
        'PyYAML>=5.4',
    ],
    extras_require={
        'test': ['pytest>=7'],
    },
    entry_points={
        'console_scripts': [
            'epbabs=epbabs.cli:main',
        ],
    },
)
