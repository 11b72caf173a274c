"""Region embeddings (balls and boxes) for partial orders and EL ontologies,
scored by a depth term plus a boundary term."""

__version__ = "0.1.0"
