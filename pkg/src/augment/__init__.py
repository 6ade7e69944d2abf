"""AoMix augmentation."""
