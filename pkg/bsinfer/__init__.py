"""Likelihood ratio inference with Bartlett corrections for Birnbaum-Saunders regression."""

__version__ = '0.1.0'
