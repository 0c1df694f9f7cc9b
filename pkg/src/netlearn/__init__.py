"""Netlist representation learning with filtered synthetic augmentation."""

__version__ = "0.1.0"
