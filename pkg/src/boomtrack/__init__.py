"""Sprayer boom tip displacement from camera frames, cross-checked against inclinometer telemetry."""

__version__ = "0.1.0"
