"""Tabular GAN with train-with-generation scheduling and fidelity metrics."""

__version__ = "0.1.0"
