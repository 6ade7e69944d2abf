"""Report rendering: markdown tables and colour maps."""
