"""Dyadic co-location features from phone location and WiFi logs, plus
friendship detection under leakage-aware cross-validation."""

__version__ = "0.1.0"
