"""httpx 0.25.1 (fixture tree)."""
