"""Result files written by experiments."""
