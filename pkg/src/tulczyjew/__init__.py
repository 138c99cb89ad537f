"""Symbolic Tulczyjew triples for string dynamics and a numerical Plateau solver."""
__version__ = "0.1.0"
