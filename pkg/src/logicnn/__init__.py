"""Trainable logic-gate networks, their frozen circuits, and the tabular benchmarks around them."""

__version__ = "0.1.0"
