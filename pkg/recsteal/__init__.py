"""recsteal: model stealing attacks against embedding recommenders."""

__version__ = "0.1.0"
