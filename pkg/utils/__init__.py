"""Logging, metrics, reporting and host helpers."""
