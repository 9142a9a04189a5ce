"""Scenario files, experiment runner, reports and the command-line entry point."""
