"""Subcommand modules; each registers its handlers on import."""
