"""httpx 0.27.2 (fixture tree)."""
