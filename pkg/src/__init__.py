"""maskworld: desk-scale embodied world model pipeline."""

__version__ = "0.1.0"
