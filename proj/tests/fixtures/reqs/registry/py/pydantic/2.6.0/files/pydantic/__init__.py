"""pydantic 2.6.0 (fixture tree)."""
