"""Discrete maximum-entropy laboratory."""
