"""Root package for the OASS toolkit."""
