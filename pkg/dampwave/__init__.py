"""
dampwave - simulator and verification harness for velocity-coupled damped wave systems
"""

__version__ = "0.1.0"
