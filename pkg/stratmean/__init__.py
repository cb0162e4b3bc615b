# -*- coding: utf-8 -*-
# __init__.py
"""stratmean, Fréchet means and their limit laws on stratified spaces."""

# version of the stratmean package:
__version__ = "0.1.0"
