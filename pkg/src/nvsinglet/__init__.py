"""Optically pumped NV hyperpolarization of 13C-1H singlet order in flowing liquids."""

__version__ = "0.1.0"
