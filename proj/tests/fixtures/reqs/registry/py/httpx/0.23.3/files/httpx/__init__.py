"""httpx 0.23.3 (fixture tree)."""
