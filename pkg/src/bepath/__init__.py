"""Barrett's esophagus pathology-report classification pipeline."""

__version__ = "0.1.0"
