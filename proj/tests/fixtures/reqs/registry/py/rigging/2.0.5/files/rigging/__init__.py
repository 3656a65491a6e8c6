"""rigging 2.0.5 (fixture tree)."""
