"""httpx 1.0.0 (fixture tree)."""
