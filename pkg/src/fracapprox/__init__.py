"""Numerical toolkit for Mittag-Leffler/Caputo calculus, fractional Laplacians
on the unit ball, and jet-span experiments for mixed local/nonlocal operators."""

__version__ = "0.1.0"
