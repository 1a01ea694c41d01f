#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from setuptools import setup  # pylint: disable=import-error
from setuptools import find_packages

setup(name="dpq-lab",
		version="0.1.0",
		description="Diffusion product quantization: PQ codebooks, codebook pools and calibration on toy diffusion models",
		packages=find_packages(exclude=["tests", "tests.*", "testing", "testing.*", "examples", "examples.*"]),
		package_data={
				"cli": ["dpq_config.json"],
		},
		install_requires=[
				"numpy>=1.24",
		],
		entry_points={
				"console_scripts": [
						"dpq=cli.launcher:main",
				],
		},
		classifiers=[
				"Development Status :: 3 - Alpha",
				"Intended Audience :: Science/Research",
				"Operating System :: POSIX",
				"Programming Language :: Python :: 3.12.3",
		],
	)

# vim: tabstop=4 shiftwidth=4
