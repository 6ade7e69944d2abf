"""Numpy UA blocks, deformable patch embedding and the toy backbone."""
