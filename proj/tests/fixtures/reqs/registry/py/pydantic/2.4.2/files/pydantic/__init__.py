"""pydantic 2.4.2 (fixture tree)."""
