"""Verification suites, reports, and the command-line front end."""
