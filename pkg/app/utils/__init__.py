"""Error hierarchy and the worker pool shared across the toolkit."""
