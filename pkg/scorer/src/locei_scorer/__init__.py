"""locei-scorer: desk-scale neural entity-insertion scorer."""

__version__ = "0.1.0"
