"""Bundled data files (demonstration vocabulary)."""
