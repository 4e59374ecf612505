"""Pre-planned crankback detours for single link/node failures, and a simulator to replay them."""

__version__ = "0.1.0"
