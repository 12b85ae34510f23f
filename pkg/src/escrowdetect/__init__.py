"""Fake escrow website detection with fraud-cue features and a composite
page-to-site similarity kernel."""

__version__ = "0.1.0"
