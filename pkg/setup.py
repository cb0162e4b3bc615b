# -*- coding: utf-8 -*-
"""set package information for stratmean pip package."""
from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="stratmean",
    version="0.1.0",
    description="Fréchet means and their limit laws on stratified spaces",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    packages=["stratmean"],
    install_requires=["numpy>=1.21", "scipy>=1.7", "pandas>=1.3"],
    entry_points={"console_scripts": ["stratmean=stratmean.harness:main_stratmean"]},
    python_requires=">=3.8",
)
