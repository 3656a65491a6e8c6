"""garak 0.10.2 (fixture tree)."""
