"""Robinson tiles: substitution, hull cohomology and zeta function."""

__version__ = "0.1.0"
