"""Retinal vessel segmentation: Gabor filter bank and local entropy thresholding."""
