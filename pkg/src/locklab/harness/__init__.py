"""Experiment pipeline, analyses and the command-line interface."""
