"""Configuration-driven experiment entry point."""
