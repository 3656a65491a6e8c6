"""evalharness (fixture checkout)."""
