"""Clinical comorbidity mention extraction, filtering, and evaluation toolkit."""

__version__ = "0.1.0"
