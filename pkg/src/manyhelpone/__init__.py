"""Rate regions of the binary many-help-one problem with conditionally independent helpers."""

__version__ = "0.1.0"
