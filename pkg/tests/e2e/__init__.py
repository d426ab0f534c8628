"""End-to-end tests - command line and full scenario runs."""
