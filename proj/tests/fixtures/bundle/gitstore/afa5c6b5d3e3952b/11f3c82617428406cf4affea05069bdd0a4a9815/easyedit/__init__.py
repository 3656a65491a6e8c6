"""easyedit (fixture checkout)."""
