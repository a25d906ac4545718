"""LLM consensus-seeking simulator"""

__version__ = "0.1.0"
