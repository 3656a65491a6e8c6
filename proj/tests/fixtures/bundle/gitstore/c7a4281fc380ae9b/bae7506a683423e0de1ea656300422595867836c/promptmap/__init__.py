"""promptmap (fixture checkout)."""
