"""
featuresort: multi-object tracking with NSA-Kalman motion, feature-bank
appearance distances and offline trajectory refinement.
"""
__version__ = '0.1.0'
