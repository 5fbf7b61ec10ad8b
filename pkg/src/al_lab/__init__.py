"""Simulation lab for augmented active learning with weighted-averaging classifiers."""
__version__ = "0.1.0"
