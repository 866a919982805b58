"""Command line, configuration, summaries and plots."""
