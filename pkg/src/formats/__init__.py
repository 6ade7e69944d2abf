"""File formats: PNG label maps, instance JSON, raw tensors and the dataset layout."""
