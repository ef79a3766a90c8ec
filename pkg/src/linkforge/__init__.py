"""linkforge: corpus engine and benchmark harness for entity insertion."""

__version__ = "0.1.0"
