"""Retry, seed derivation and state conversions."""
