"""Knowledge-enhanced semantic plausibility classification of simple events."""

__version__ = "0.1.0"
