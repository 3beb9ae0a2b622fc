"""Mild solutions of dissipative SQG on a periodic grid."""

__version__ = "0.1.0"
