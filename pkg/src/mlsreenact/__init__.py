"""Deterministic MLS image-reenactment engine: point-pair solves, dense warps,
a co-attention feature extractor forward pass, CLI, and HTTP service."""

__version__ = "0.1.0"
