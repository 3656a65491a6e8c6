"""judges 0.0.8 (fixture tree)."""
