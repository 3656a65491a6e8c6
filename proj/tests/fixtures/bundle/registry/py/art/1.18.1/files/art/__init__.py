"""art 1.18.1 (fixture tree)."""
