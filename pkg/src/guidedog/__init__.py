"""Guidance engine for a flying guide dog."""
