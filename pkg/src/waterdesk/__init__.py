"""Desk-scale surface-water data platform: versioned datasets, access
control, ingestion, what-if working sets, provenance, notifications,
job execution and a daily water-balance model."""

from .platform import Platform, PlatformConfig

__version__ = "0.1.0"

__all__ = ["Platform", "PlatformConfig", "__version__"]
