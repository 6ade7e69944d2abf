"""Synthetic OASS scenes with brute-force metric certificates."""
