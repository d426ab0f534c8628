"""
Detector RTI - Source Package

Device-free localization by radio tomographic imaging with per-link
reflection-envelope detectors and addition-only back-projection.
"""

__version__ = "0.1.0"
