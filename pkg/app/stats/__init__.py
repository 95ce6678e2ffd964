"""Statistics and verdicts for absorption, exponentiality, LLN, scaling and QSD limits."""
