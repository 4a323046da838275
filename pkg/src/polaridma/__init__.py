"""Polar codes with belief-propagation decoding inside an IDMA multi-user receiver."""

__version__ = "0.1.0"
