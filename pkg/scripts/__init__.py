"""Command-line entry points for the sliding-window memory stack."""
