"""fuzzyai (fixture checkout)."""
