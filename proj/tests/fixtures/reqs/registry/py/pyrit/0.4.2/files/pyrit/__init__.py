"""pyrit 0.4.2 (fixture tree)."""
