"""Unsupervised grasp-pose planning on depth images.

Sample line poses, keep the ones standing on objects, cluster them, give each
cluster a major axis, and rank the resulting grasp rectangles by finger-band
clearance (the Grasp Decide Index).
"""
__version__ = "0.1.0"
