"""Experiment runners, traces, configuration and the command-line interface."""
