"""pydantic 2.5.3 (fixture tree)."""
