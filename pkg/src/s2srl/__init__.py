"""Sequence-to-sequence semantic role labeling with attention and copying."""

__version__ = "0.1.0"
