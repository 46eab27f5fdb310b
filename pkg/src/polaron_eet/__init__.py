"""Polaron-transformed master equation for energy transfer in a donor-acceptor pair."""

__version__ = "0.1.0"
