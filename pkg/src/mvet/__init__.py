"""Multiview entity typing: view construction, fusion, training and evaluation."""

__version__ = "0.1.0"
