"""giskard 2.15.1 (fixture tree)."""
