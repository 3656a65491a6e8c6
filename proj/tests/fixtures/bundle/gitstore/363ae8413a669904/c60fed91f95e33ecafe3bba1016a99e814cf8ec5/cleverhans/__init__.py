"""cleverhans (fixture checkout)."""
