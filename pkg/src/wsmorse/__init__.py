"""Stringy Morse theory for closed strings: geodesic surfaces, Jacobi fields, conjugate strings, index forms."""

__version__ = "0.1.0"
