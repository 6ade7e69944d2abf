"""Self-training math: pseudo-labels, confidence weight, target loss, EMA teacher."""
