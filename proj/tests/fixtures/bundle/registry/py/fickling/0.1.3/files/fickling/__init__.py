"""fickling 0.1.3 (fixture tree)."""
