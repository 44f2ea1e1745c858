#!/usr/bin/env python
from setuptools import setup, find_packages


setup(
    name='parbalans',
    license='Apache License 2.0',
    version='0.1.0',
    packages=find_packages(exclude=['tests']),
    package_data={'parbalans.cli': ['parbalans.conf']},
    scripts=['scripts/parbalans'],
    install_requires=['numpy', 'progressbar2'],
    python_requires='>=3.8',
    zip_safe=False,
    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Operating System :: POSIX',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
)
