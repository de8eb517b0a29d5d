"""Command-line front-end: simulate, fit and summarize."""
