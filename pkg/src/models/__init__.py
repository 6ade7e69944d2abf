"""Core mask, label-map and annotation types."""
