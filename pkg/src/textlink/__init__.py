"""Text-component linkage with a graph-convolution relational reasoner."""

__version__ = "0.1.0"
