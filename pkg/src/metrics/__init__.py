"""The five OASS benchmark metrics."""
