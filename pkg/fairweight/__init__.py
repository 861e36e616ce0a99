"""Influence-driven sample reweighting for fair binary classification."""

__version__ = "0.1.0"
