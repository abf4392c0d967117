# coding: utf-8

"""
A Python module for simulating and bounding strong mixing coefficients of
Markov chains in random environments.
"""

import os
import re

from setuptools import setup


def readfile(filename):
    with open(filename, encoding="utf-8") as fp:
        filecontents = fp.read()
    return filecontents


def get_version():
    init = readfile(os.path.join(os.path.dirname(__file__), "mixsim", "__init__.py"))
    return re.search(r'^__version__ = "([^"]+)"', init, re.M).group(1)


setup(
    name="mixsim",
    version=get_version(),
    packages=["mixsim", "mixsim.iostream", "mixsim.experiments"],
    license="MIT",
    description="Mixing coefficient bounds and coupling simulations for Markov chains in random environments",
    long_description=readfile(os.path.join(os.path.dirname(__file__), "README.md")),
    long_description_content_type="text/markdown",
    install_requires=readfile(os.path.join(os.path.dirname(__file__), "requirements.txt")),
    python_requires=">=3.7",
    entry_points={"console_scripts": ["mixsim=mixsim.experiments.runner:cli"]},
    classifiers=[
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
    ],
)
