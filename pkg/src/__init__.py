"""
D2DRegen - storage scheme planner for D2D caching
Main source package initialization
"""

__version__ = "0.2.0"
__author__ = "Roshan Matthew"
