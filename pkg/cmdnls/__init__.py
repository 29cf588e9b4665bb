"""Numerics and symbolics for the Calogero-Moser derivative NLS and its gauged form."""
