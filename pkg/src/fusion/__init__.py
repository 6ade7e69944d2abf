"""OAFusion: class voting and (amodal) panoptic fusion."""
